"""Active mapping of cluttered shelves with camera moves and pushes.

Evidential voxel beliefs are updated exactly from rendered depth/label
images and by Monte Carlo marginalization through a grid push model; a
greedy two-step planner trades view-pair information gain against the gain
of a push followed by one view.
"""
from .core import (BACKGROUND, EvidentialBelief, GridSpec, SemanticMap, Viewpoint,
                   belief_from_map, default_viewpoints, most_likely_map, new_uniform_belief,
                   occupancy_entropy, semantic_entropy)
from .infogain import best_push, best_view_pair, pair_gain, reg_term, view_gain
from .manipulation import grid_dynamics, sample_map, update_manipulation
from .metrics import evidential_ce, mece, miou, object_audit
from .observation import update_observation
from .planner import (Action, EpisodeLog, PlannerConfig, baseline_policies, decide,
                      make_policy, run_episode, terminated)
from .push_sampler import PushAction, frontier_points, sample_pushes
from .scenario import ClassSpec, GenParams, sample_scene, sample_scenes
from .simulator import InfeasiblePushError, Observation, Scene, SceneObject, apply_push, render, to_map

__version__ = "0.1.0"
