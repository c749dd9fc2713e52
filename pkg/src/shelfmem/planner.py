"""Greedy two-step view/push policy, termination test, episode loop and baselines."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (EvidentialBelief, Viewpoint, default_viewpoints, most_likely_map,
                   new_uniform_belief, occupancy_entropy, semantic_entropy)
from .infogain import DEFAULT_STRIDE, best_push, best_view_pair, reg_term
from .manipulation import PropagationResult, update_manipulation
from .metrics import miou
from .observation import update_observation
from .push_sampler import PushAction, sample_pushes
from .simulator import InfeasiblePushError, Scene, apply_push, render, to_map

VIEW, PUSH = "view", "push"


@dataclass(frozen=True)
class Action:
    """Either a camera move (``view``) or a push; exactly one payload is set."""

    kind: str
    view: Viewpoint | None = None
    push: PushAction | None = None
    view_index: int | None = None

    def __post_init__(self):
        if self.kind == VIEW:
            ok = self.view is not None and self.push is None
        elif self.kind == PUSH:
            ok = self.push is not None and self.view is None
        else:
            ok = False
        if not ok:
            raise ValueError("an Action carries exactly one payload matching its kind")

    def to_dict(self) -> dict:
        if self.kind == VIEW:
            return {"kind": VIEW, "view_index": self.view_index}
        return {"kind": PUSH, "push": self.push.to_dict()}


@dataclass(frozen=True)
class PlannerConfig:
    """Planner settings; ``views`` is the candidate camera set."""

    gamma: float = 0.01
    budget: int = 20
    n_samples: int = 32
    k_pushes: int = 20
    term_frac: float = 0.95
    term_conf: float = 0.85
    views: tuple[Viewpoint, ...] = field(default_factory=lambda: tuple(default_viewpoints()))
    ray_stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if not (0 <= self.term_frac <= 1 and 0 <= self.term_conf <= 1):
            raise ValueError("termination thresholds must lie in [0, 1]")
        if self.n_samples < 1 or self.k_pushes < 1 or self.ray_stride < 1:
            raise ValueError("n_samples, k_pushes and ray_stride must be >= 1")

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "budget": self.budget, "n_samples": self.n_samples,
                "k_pushes": self.k_pushes, "term_frac": self.term_frac,
                "term_conf": self.term_conf, "n_views": len(self.views),
                "ray_stride": self.ray_stride}


@dataclass
class Decision:
    """An action plus the quantities that led to it (NaN when not computed)."""

    action: Action
    igv: float = float("nan")
    igm: float = float("nan")
    reg: float = float("nan")
    predicted: PropagationResult | None = None


def terminated(belief: EvidentialBelief, cfg: PlannerConfig) -> bool:
    """True once ``term_frac`` of floor cells have a class probability above ``term_conf``."""
    confident = belief.sem_mean.max(axis=-1) > cfg.term_conf
    return bool(confident.mean() >= cfg.term_frac)


def prefers_view(igv: float, igm: float, reg: float, gamma: float) -> bool:
    """The greedy rule: look if the view-pair gain beats the push gain plus gamma * Reg."""
    return igv > igm + gamma * reg


def _view(cfg: PlannerConfig, i: int) -> Action:
    return Action(VIEW, view=cfg.views[i], view_index=int(i))


def _best_push_decision(belief, cfg, rng) -> Decision | None:
    pushes = sample_pushes(belief, cfg.k_pushes, rng)
    if not pushes:
        return None
    k, _, igm, pred = best_push(belief, pushes, cfg.views, cfg.n_samples, rng, cfg.ray_stride)
    return Decision(Action(PUSH, push=pushes[k]), igm=igm, reg=reg_term(belief, pred.belief),
                    predicted=pred)


def decide(belief: EvidentialBelief, cfg: PlannerConfig, rng=None) -> Decision:
    """One step of the full policy: best view, or best push when it scores higher."""
    if len(cfg.views) < 2:
        raise ValueError("need at least two candidate views")
    rng = np.random.default_rng(rng)
    i, _, igv = best_view_pair(belief, cfg.views, cfg.ray_stride)
    view = Decision(_view(cfg, i), igv=igv)
    if terminated(belief, cfg):
        return view
    pd = _best_push_decision(belief, cfg, rng)
    if pd is None:
        return view
    pd.igv = igv
    if prefers_view(igv, pd.igm, pd.reg, cfg.gamma):
        view.igm, view.reg = pd.igm, pd.reg
        return view
    return pd


class Policy:
    """Maps the current belief (and, for privileged policies, the scene) to a Decision."""

    name = "policy"
    privileged = False

    def reset(self) -> None:
        pass

    def __call__(self, belief, cfg, rng, t: int, scene: Scene | None = None) -> Decision:
        raise NotImplementedError


class FullPolicy(Policy):
    name = "mem"

    def __call__(self, belief, cfg, rng, t, scene=None):
        return decide(belief, cfg, rng)


class VppOnly(Policy):
    """Best view-pair policy that never pushes."""

    name = "vpp_only"

    def __call__(self, belief, cfg, rng, t, scene=None):
        i, _, igv = best_view_pair(belief, cfg.views, cfg.ray_stride)
        return Decision(_view(cfg, i), igv=igv)


class RandomView(Policy):
    """Uniform random views, without replacement until the set is exhausted, then with."""

    name = "random_view"

    def __init__(self):
        self.reset()

    def reset(self):
        self._order: list[int] | None = None

    def __call__(self, belief, cfg, rng, t, scene=None):
        if self._order is None:
            self._order = list(rng.permutation(len(cfg.views)))
        if self._order:
            return Decision(_view(cfg, int(self._order.pop(0))))
        return Decision(_view(cfg, int(rng.integers(len(cfg.views)))))


class PushEvery(Policy):
    """Best views, with the best push forced every ``period`` steps (t = period, 2 period, ...)."""

    def __init__(self, period: int = 5):
        self.period = period
        self.name = f"push_every_{period}"

    def __call__(self, belief, cfg, rng, t, scene=None):
        i, _, igv = best_view_pair(belief, cfg.views, cfg.ray_stride)
        if t > 0 and t % self.period == 0 and not terminated(belief, cfg):
            pd = _best_push_decision(belief, cfg, rng)
            if pd is not None:
                pd.igv = igv
                return pd
        return Decision(_view(cfg, i), igv=igv)


class SaturationPush(Policy):
    """Best views until consecutive IGV values differ by less than ``rel_tol``, then push."""

    name = "saturation_push"

    def __init__(self, rel_tol: float = 0.02):
        self.rel_tol = rel_tol
        self.reset()

    def reset(self):
        self.last_igv: float | None = None

    def saturated(self, igv: float) -> bool:
        prev = self.last_igv
        return prev is not None and prev > 0 and abs(igv - prev) / prev < self.rel_tol

    def __call__(self, belief, cfg, rng, t, scene=None):
        i, _, igv = best_view_pair(belief, cfg.views, cfg.ray_stride)
        if self.saturated(igv) and not terminated(belief, cfg):
            pd = _best_push_decision(belief, cfg, rng)
            if pd is not None:
                pd.igv = igv
                self.last_igv = None
                return pd
        self.last_igv = igv
        return Decision(_view(cfg, i), igv=igv)


def realized_gains(belief: EvidentialBelief, scene: Scene, views) -> np.ndarray:
    """Occupancy-entropy reduction each view would actually produce on ``scene``."""
    h0 = occupancy_entropy(belief)
    return np.array([h0 - occupancy_entropy(update_observation(belief, render(scene, v)))
                     for v in views])


class Clairvoyant(Policy):
    """Greedy oracle: the view with the largest realized occupancy-entropy drop."""

    name = "clairvoyant"
    privileged = True

    def __call__(self, belief, cfg, rng, t, scene=None):
        if scene is None:
            raise ValueError("clairvoyant policy needs the true scene")
        g = realized_gains(belief, scene, cfg.views)
        i = int(np.argmax(g))
        return Decision(_view(cfg, i), igv=float(g[i]))


POLICIES: dict[str, Callable[[], Policy]] = {
    "mem": FullPolicy,
    "vpp_only": VppOnly,
    "random_view": RandomView,
    "push_every_5": lambda: PushEvery(5),
    "saturation_push": SaturationPush,
    "clairvoyant": Clairvoyant,
}


def baseline_policies() -> dict[str, Policy]:
    """Fresh instances of the comparison policies, keyed by name."""
    return {k: POLICIES[k]() for k in ("random_view", "vpp_only", "push_every_5",
                                       "saturation_push", "clairvoyant")}


def make_policy(name: str) -> Policy:
    try:
        return POLICIES[name]()
    except KeyError:
        raise KeyError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None


@dataclass
class EpisodeLog:
    """Per-step records of one budgeted run plus the final belief and true scene."""

    policy: str
    seed: int | None
    config: dict
    steps: list[dict] = field(default_factory=list)
    final_belief: EvidentialBelief | None = None
    final_scene: Scene | None = None

    def __len__(self):
        return len(self.steps)

    def series(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.steps], dtype=float)


def _step_metrics(belief: EvidentialBelief, scene: Scene) -> dict:
    occ_iou, sem_miou = miou(most_likely_map(belief), to_map(scene))
    return {"occ_entropy": occupancy_entropy(belief), "sem_entropy": semantic_entropy(belief),
            "occ_iou": occ_iou, "sem_miou": sem_miou}


def run_episode(scene: Scene, policy: Policy | str, cfg: PlannerConfig, rng=None,
                seed: int | None = None) -> EpisodeLog:
    """Run a policy for ``cfg.budget`` steps from the uniform prior.

    Views are rendered from the true scene and integrated exactly. A push
    moves the true scene with the simulator while the belief becomes the
    Monte Carlo prediction, since no image is taken during a push. A push
    the real scene rejects (start inside an object) leaves both unchanged.
    """
    if isinstance(policy, str):
        policy = make_policy(policy)
    policy.reset()
    if rng is None:
        rng = np.random.default_rng(seed)
    rng = np.random.default_rng(rng)
    belief = new_uniform_belief(scene.spec)
    log = EpisodeLog(policy.name, seed, cfg.to_dict())
    for t in range(cfg.budget):
        t0 = time.perf_counter()
        dec = policy(belief, cfg, rng, t, scene if policy.privileged else None)
        a = dec.action
        rec = {"step": t, "action": a.to_dict(), "igv": dec.igv, "igm": dec.igm, "reg": dec.reg}
        if a.kind == VIEW:
            belief = update_observation(belief, render(scene, a.view))
        else:
            pred = dec.predicted or update_manipulation(belief, a.push, cfg.n_samples, rng)
            try:
                scene = apply_push(scene, a.push)
                belief = pred.belief
                rec["executed"] = True
            except InfeasiblePushError:
                rec["executed"] = False
            gt = to_map(scene)
            rec["model_gap"] = float(np.mean((pred.occ_mean > 0.5) != gt.occ))
        rec.update(_step_metrics(belief, scene))
        rec["wall_time"] = time.perf_counter() - t0
        log.steps.append(rec)
    log.final_belief = belief
    log.final_scene = scene
    return log
