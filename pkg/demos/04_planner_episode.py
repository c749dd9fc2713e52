"""Run the planner and two baselines on a bundled high-occlusion shelf.

Run: python demos/04_planner_episode.py
"""
from shelfmem.io import bundled_scenes
from shelfmem.planner import PlannerConfig, run_episode

scene = bundled_scenes("high_")[0]
cfg = PlannerConfig(budget=10)

for policy in ("mem", "vpp_only", "random_view", "push_every_5"):
    log = run_episode(scene, policy, cfg, seed=0)
    kinds = "".join("P" if s["action"]["kind"] == "push" else "v" for s in log.steps)
    last = log.steps[-1]
    print(f"{policy:13s} {kinds}  occ entropy {last['occ_entropy']:8.1f}  "
          f"semantic mIoU {last['sem_miou']:.3f}")
