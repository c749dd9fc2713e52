"""Generate a cluttered shelf, look at it from a few cameras and watch the map fill in.

Run: python demos/01_scene_and_views.py
"""
import numpy as np

from shelfmem.core import default_viewpoints, most_likely_map, new_uniform_belief
from shelfmem.metrics import mece, miou
from shelfmem.observation import update_observation
from shelfmem.scenario import GenParams, sample_scene
from shelfmem.simulator import render, to_map

scene = sample_scene(GenParams(), 3)
truth = to_map(scene)
print(f"{len(scene.objects)} objects cover {scene.floor_fraction():.0%} of the shelf floor")

# Start from the uniform prior: every voxel 50/50, every class equally likely.
views = default_viewpoints()
belief = new_uniform_belief(scene.spec)

# Integrate views spread across the camera ring and report map quality after each.
for k in (0, 15, 30, 45, 7, 22):
    belief = update_observation(belief, render(scene, views[k]))
    occ_iou, sem_miou = miou(most_likely_map(belief), truth)
    print(f"view {k:2d}: occupancy IoU {occ_iou:.3f}  semantic mIoU {sem_miou:.3f}  "
          f"mECE {mece(belief, truth):.3f}")

# Voxels behind the front row are still near the prior.
unseen = np.isclose(belief.occ_mean, 0.5)
print(f"{unseen.mean():.0%} of voxels never touched by a ray")
