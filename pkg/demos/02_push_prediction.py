"""Predict what a push does to an uncertain map, then compare with the simulator.

Run: python demos/02_push_prediction.py
"""
import numpy as np

from shelfmem.core import default_viewpoints, new_uniform_belief
from shelfmem.manipulation import update_manipulation
from shelfmem.observation import update_observation
from shelfmem.push_sampler import sample_pushes
from shelfmem.scenario import GenParams, sample_scene
from shelfmem.simulator import apply_push, render, to_map

scene = sample_scene(GenParams(), 8)
belief = new_uniform_belief(scene.spec)
for v in default_viewpoints()[::6]:
    belief = update_observation(belief, render(scene, v))

# Candidate pushes start at the frontier between known free space and likely objects.
pushes = sample_pushes(belief, k=5, rng=0)
push = pushes[0]
print(f"push from {np.round(push.start, 3)} along {np.round(push.dir, 2)} for {push.distance:.2f} m")

# Monte Carlo prediction: sample maps, push each one on the grid, average.
pred = update_manipulation(belief, push, n_samples=64, rng=0)
print(f"voxels expected to change: {(pred.diff > 0.05).sum()}")

# The real shelf after the same push.
after = to_map(apply_push(scene, push))
agree = np.mean((pred.occ_mean > 0.5) == after.occ)
print(f"predicted occupancy agrees with the simulated outcome on {agree:.1%} of voxels")

# Uncertainty grows where things moved: the evidence strength drops there.
moved = pred.diff > 0.05
if moved.any():
    s0 = belief.lambda_occ.sum(-1)[moved].mean()
    s1 = pred.belief.lambda_occ.sum(-1)[moved].mean()
    print(f"mean evidence strength in moved voxels: {s0:.1f} -> {s1:.1f}")
