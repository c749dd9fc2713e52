"""Command-line entry point: scene generation, episodes, benchmarks, belief scoring."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import default_viewpoints, most_likely_map
from .metrics import belief_evidential_ce, mece, miou, object_audit
from .planner import POLICIES, PlannerConfig, make_policy, run_episode
from .scenario import GenParams, sample_scenes
from .simulator import to_map

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_INVARIANT = 4
EXIT_POLICY = 5

STEP_COLUMNS = ["scene", "policy", "seed", "step", "kind", "executed", "igv", "igm", "reg",
                "occ_entropy", "sem_entropy", "occ_iou", "sem_miou", "model_gap"]
SUMMARY_METRICS = ["occ_iou", "sem_miou", "occ_entropy", "sem_entropy"]


class PolicyError(KeyError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _name_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _nonneg(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def max_workers() -> int:
    """Worker cap from MEM_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MEM_THREADS", "1")))
    except ValueError:
        return 1


def _check_policies(names):
    for n in names:
        if n not in POLICIES:
            raise PolicyError(f"unknown policy {n!r}; choose from {', '.join(sorted(POLICIES))}")


def _config(args, scene) -> PlannerConfig:
    return PlannerConfig(gamma=args.gamma, budget=args.budget, n_samples=args.mc_samples,
                         ray_stride=args.stride, views=default_viewpoints(scene.spec))


def _scene_files(d) -> list[Path]:
    d = Path(d)
    if not d.is_dir():
        raise FileNotFoundError(f"{d}: not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"{d}: no scene files")
    return files


def cmd_gen_scenes(args) -> int:
    params = GenParams()
    if args.params:
        try:
            params = GenParams.from_dict(json.loads(Path(args.params).read_text()))
        except json.JSONDecodeError as e:
            raise io.FormatError(f"{args.params}: not valid JSON ({e})") from e
        except (KeyError, TypeError) as e:
            raise io.FormatError(f"{args.params}: bad generator parameters ({e})") from e
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = sample_scenes(params, args.seed, args.count, args.occlusion)
    for k, sc in enumerate(scenes):
        meta = {"seed": args.seed, "index": k, "occlusion": args.occlusion,
                "params": params.to_dict()}
        io.save_scene(out / f"scene_{k:04d}.json", sc, meta)
    print(f"wrote {len(scenes)} scenes to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    _check_policies([args.policy])
    scene = io.load_scene(args.scene)
    log = run_episode(scene, make_policy(args.policy), _config(args, scene), seed=args.seed)
    io.write_log(args.out, log, scene)
    if args.belief_out:
        io.save_belief(args.belief_out, log.final_belief,
                       {"policy": args.policy, "seed": args.seed, "scene": str(args.scene)})
    last = log.steps[-1] if log.steps else None
    msg = f"{args.policy} seed {args.seed}: {len(log)} steps"
    if last:
        msg += f", final sem_miou {last['sem_miou']:.3f}"
    print(msg)
    return EXIT_OK


def _episode_job(job):
    path, policy, seed, cfg_kw = job
    scene = io.load_scene(path)
    cfg = PlannerConfig(views=default_viewpoints(scene.spec), **cfg_kw)
    log = run_episode(scene, make_policy(policy), cfg, seed=seed)
    return scene, log


def _run_jobs(jobs):
    n = min(max_workers(), len(jobs))
    if n <= 1:
        return [_episode_job(j) for j in jobs]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(_episode_job, jobs))


def _cfg_kw(args) -> dict:
    return {"gamma": args.gamma, "budget": args.budget, "n_samples": args.mc_samples,
            "ray_stride": args.stride}


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation across seeds (and scenes) per policy and step."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["policy"], r["step"]), []).append(r)
    out = []
    for (policy, step), rs in sorted(groups.items()):
        rec = {"policy": policy, "step": step, "n": len(rs)}
        for m in SUMMARY_METRICS:
            v = np.array([r[m] for r in rs], dtype=float)
            rec[f"{m}_mean"] = float(v.mean())
            rec[f"{m}_std"] = float(v.std())
        out.append(rec)
    return out


def _step_rows(scene_name, log) -> list[dict]:
    rows = []
    for s in log.steps:
        rows.append({"scene": scene_name, "policy": log.policy, "seed": log.seed,
                     "kind": s["action"]["kind"], **s})
    return rows


def cmd_bench(args) -> int:
    _check_policies(args.policies)
    files = _scene_files(args.scenes)
    for f in files:
        io.load_scene(f)
    out = Path(args.out)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    kw = _cfg_kw(args)
    jobs = [(str(f), p, s, kw) for f in files for p in args.policies for s in args.seeds]
    results = _run_jobs(jobs)
    rows = []
    for (path, policy, seed, _), (scene, log) in zip(jobs, results):
        name = Path(path).stem
        io.write_log(out / "logs" / f"{name}__{policy}__{seed}.jsonl", log, scene)
        rows += _step_rows(name, log)
    io.write_csv(out / "steps.csv", rows, STEP_COLUMNS)
    summ = summarize(rows)
    cols = ["policy", "step", "n"] + [f"{m}_{s}" for m in SUMMARY_METRICS
                                      for s in ("mean", "std")]
    io.write_csv(out / "summary.csv", summ, cols)
    (out / "bench.json").write_text(io.dumps(
        {"scenes": [f.name for f in files], "policies": args.policies, "seeds": args.seeds,
         "config": kw}) + "\n")
    print(f"{len(jobs)} episodes written to {out}")
    return EXIT_OK


def evaluate_belief(belief, scene, bins: int = 10) -> dict:
    gt = to_map(scene)
    pred = most_likely_map(belief)
    occ_iou, sem_miou = miou(pred, gt)
    res = {"occ_iou": occ_iou, "sem_miou": sem_miou, "mece": mece(belief, gt, bins)}
    for eps in (0.0, 1.0):
        o, s = belief_evidential_ce(belief, gt, eps)
        res[f"evidential_ce_occ_eps{eps:g}"] = o
        res[f"evidential_ce_sem_eps{eps:g}"] = s
    res["audit"] = object_audit(pred, scene)
    return res


def cmd_eval_belief(args) -> int:
    belief = io.load_belief(args.belief)
    scene = io.load_scene(args.scene)
    if belief.spec != scene.spec:
        raise io.FormatError("belief and scene use different grids")
    res = evaluate_belief(belief, scene, args.bins)
    text = json.dumps(res, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep_gamma(args) -> int:
    files = _scene_files(args.scenes)
    for f in files:
        io.load_scene(f)
    rows = []
    for g in args.gammas:
        kw = dict(_cfg_kw(args), gamma=g)
        jobs = [(str(f), "mem", s, kw) for f in files for s in args.seeds]
        res = _run_jobs(jobs)
        final = np.array([log.steps[-1]["sem_miou"] if log.steps else np.nan
                          for _, log in res])
        pushes = np.array([sum(s["action"]["kind"] == "push" for s in log.steps)
                           for _, log in res])
        rows.append({"gamma": g, "n": len(res), "sem_miou_mean": float(final.mean()),
                     "sem_miou_std": float(final.std()), "pushes_mean": float(pushes.mean())})
        print(f"gamma {g:g}: sem_miou {final.mean():.3f} +- {final.std():.3f}, "
              f"{pushes.mean():.1f} pushes")
    io.write_csv(args.out, rows, ["gamma", "n", "sem_miou_mean", "sem_miou_std",
                                  "pushes_mean"])
    return EXIT_OK


def _episode_flags(p, with_seed=True):
    p.add_argument("--budget", type=_nonneg, default=20)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--mc-samples", type=_pos, default=32)
    p.add_argument("--stride", type=_pos, default=4, help="pixel stride for gain ray casting")
    if with_seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="shelfmem", description="Shelf mapping with pushes: experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scenes", help="generate scene files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_pos, required=True)
    p.add_argument("--occlusion", choices=("low", "high"), default=None)
    p.add_argument("--params", help="JSON file of generator parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scenes)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--scene", required=True)
    p.add_argument("--policy", default="mem")
    _episode_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--belief-out", help="also save the final belief (.npz)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run scenes x policies x seeds")
    p.add_argument("--scenes", required=True)
    p.add_argument("--policies", type=_name_list, required=True)
    p.add_argument("--seeds", type=_int_list, required=True)
    _episode_flags(p, with_seed=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval-belief", help="score a saved belief against a scene")
    p.add_argument("--belief", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--bins", type=_pos, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_belief)

    p = sub.add_parser("sweep-gamma", help="final sem_miou of the full planner per gamma")
    p.add_argument("--scenes", required=True)
    p.add_argument("--gammas", type=_float_list, required=True)
    p.add_argument("--seeds", type=_int_list, default=[0])
    _episode_flags(p, with_seed=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_gamma)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PolicyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return EXIT_POLICY
    except (FileNotFoundError, IsADirectoryError, io.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FILE
    except (ValueError, AssertionError, RuntimeError) as e:
        print(f"error: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
