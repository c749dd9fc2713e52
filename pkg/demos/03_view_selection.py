"""Score every camera by expected information and pick the best pair.

Run: python demos/03_view_selection.py
"""
import numpy as np

from shelfmem.core import default_viewpoints, new_uniform_belief
from shelfmem.infogain import best_view_pair, view_gains
from shelfmem.observation import update_observation
from shelfmem.scenario import GenParams, sample_scene
from shelfmem.simulator import render

scene = sample_scene(GenParams(), 1)
views = default_viewpoints()
belief = update_observation(new_uniform_belief(scene.spec), render(scene, views[30]))

# Single-view gains: entropy of each voxel weighted by how likely a ray reaches it.
g = view_gains(belief, views, 2)
top = np.argsort(g)[::-1][:5]
print("top single views:", ", ".join(f"{i} ({g[i]:.1f} nats)" for i in top))

# The two-step lookahead counts voxels seen by both views once.
i, j, gain = best_view_pair(belief, views, 2)
print(f"best pair {i} then {j}: {gain:.1f} nats (sum of singles {g[i] + g[j]:.1f})")
