"""Ablation grid runner: conditioning and horizon variants with full metric reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import RunConfig, config_to_dict
from ..diffusion.policy import ROLE_COPILOT, ROLE_EVALUATOR, PolicyHead
from ..diffusion.training import WindowIndex
from ..drivers.dataset import DemoDataset
from ..nn import CondLayout
from ..seeding import rng_for
from ..sim.track import generate_track
from .metrics import f1_score, min_ade_k, min_aoe_k, safety_rates
from .rollouts import classify_rollout, prediction_rollout_set, timed_samples, window_cond

EXPERIMENT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CellSpec:
    """One ablation cell: a policy variant to train and measure."""

    name: str
    role: str  # "evaluator" | "copilot"
    t_obs: int
    t_pred: int
    include_position: bool = True
    include_visual: bool = True
    include_actions: bool = True  # evaluator only; ignored for the copilot

    def layout(self, latent_dim: int) -> CondLayout:
        include_actions = self.include_actions and self.role == ROLE_EVALUATOR
        return CondLayout(
            t_obs=self.t_obs,
            latent_dim=latent_dim,
            include_actions=include_actions,
            include_position=self.include_position,
            include_visual=self.include_visual,
        )


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    cells: tuple[CellSpec, ...]
    eval_windows: int = 40
    rollout_samples: int = 10
    timing_samples: int = 30
    epochs: int | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "format_version": EXPERIMENT_FORMAT_VERSION,
            "name": self.name,
            "seed": self.seed,
            "eval_windows": self.eval_windows,
            "rollout_samples": self.rollout_samples,
            "timing_samples": self.timing_samples,
            "epochs": self.epochs,
            "cells": [vars(c) for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if d.get("format_version") != EXPERIMENT_FORMAT_VERSION:
            raise ValueError(f"unsupported experiment format version: {d.get('format_version')}")
        cells = tuple(CellSpec(**c) for c in d["cells"])
        return cls(
            name=d["name"],
            cells=cells,
            eval_windows=d.get("eval_windows", 40),
            rollout_samples=d.get("rollout_samples", 10),
            timing_samples=d.get("timing_samples", 30),
            epochs=d.get("epochs"),
            seed=d.get("seed", 0),
        )


def default_evaluator_grid() -> tuple[CellSpec, ...]:
    base = dict(role=ROLE_EVALUATOR, t_obs=20, t_pred=30)
    return (
        CellSpec(name="default", **base),
        CellSpec(name="w/o position", **{**base}, include_position=False),
        CellSpec(name="w/o action", **{**base}, include_actions=False),
        CellSpec(name="w/o visual context", **{**base}, include_visual=False),
        CellSpec(name="obs 15", role=ROLE_EVALUATOR, t_obs=15, t_pred=30),
        CellSpec(name="obs 25", role=ROLE_EVALUATOR, t_obs=25, t_pred=30),
        CellSpec(name="pred 25", role=ROLE_EVALUATOR, t_obs=20, t_pred=25),
        CellSpec(name="pred 35", role=ROLE_EVALUATOR, t_obs=20, t_pred=35),
    )


def default_copilot_grid() -> tuple[CellSpec, ...]:
    base = dict(role=ROLE_COPILOT, t_obs=10, t_pred=15)
    return (
        CellSpec(name="default", **base),
        CellSpec(name="w/o position", **{**base}, include_position=False),
        CellSpec(name="w/o visual context", **{**base}, include_visual=False),
        CellSpec(name="obs 5", role=ROLE_COPILOT, t_obs=5, t_pred=15),
        CellSpec(name="obs 15", role=ROLE_COPILOT, t_obs=15, t_pred=15),
        CellSpec(name="pred 10", role=ROLE_COPILOT, t_obs=10, t_pred=10),
        CellSpec(name="pred 20", role=ROLE_COPILOT, t_obs=10, t_pred=20),
    )


def _evaluator_metrics(policy: PolicyHead, dataset: DemoDataset, spec: ExperimentSpec, cfg: RunConfig) -> dict:
    index = WindowIndex(dataset, policy.t_obs, policy.t_pred)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    picks = rng.choice(len(index), size=min(spec.eval_windows, len(index)), replace=False)
    ades, aoes = [], []
    for i in picks:
        rs = prediction_rollout_set(policy, dataset, index, int(i), spec.rollout_samples, cfg.sim, spec.seed)
        ades.append(min_ade_k(rs))
        aoes.append(min_aoe_k(rs))
    cond, _, _ = window_cond(policy, index, int(picks[0]))
    times = timed_samples(policy, cond, spec.timing_samples, spec.seed)
    return {
        "min_ade_k": float(np.mean(ades)),
        "min_ade_k_std": float(np.std(ades)),
        "min_aoe_k": float(np.mean(aoes)),
        "min_aoe_k_std": float(np.std(aoes)),
        "compute_mean_s": float(times.mean()),
        "compute_std_s": float(times.std()),
    }


def _copilot_metrics(
    policy: PolicyHead,
    dataset: DemoDataset,
    spec: ExperimentSpec,
    cfg: RunConfig,
    tau_nll: float | None,
) -> dict:
    from ..autonomy.scoring import nll_score
    from ..diffusion.policy import ActionSequence, sample as sample_seq
    from .rollouts import integrate_actions

    index = WindowIndex(dataset, policy.t_obs, policy.t_pred)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed + 1))
    picks = rng.choice(len(index), size=min(spec.eval_windows, len(index)), replace=False)
    tracks = {}
    flags = []
    predictions, labels = [], []
    for i in picks:
        ep_idx, t = index.items[int(i)]
        ep = dataset.episodes[ep_idx]
        track = tracks.setdefault(ep.track_seed, generate_track(ep.track_seed, cfg.track))
        cond, future, start = window_cond(policy, index, int(i))
        for j in range(spec.rollout_samples):
            srng = np.random.default_rng(np.random.SeedSequence((spec.seed, int(i), j)))
            seq = sample_seq(policy, cond, srng)
            poses = integrate_actions(start, seq.values, cfg.sim)
            flags.append(classify_rollout(track, poses, cfg.car_radius))
        gt_poses = integrate_actions(start, future, cfg.sim)
        _, gt_off = classify_rollout(track, gt_poses, cfg.car_radius)
        labels.append(gt_off)
        if tau_nll is not None:
            score = nll_score(
                ActionSequence(values=future, space="raw"),
                policy,
                cond,
                rng_for(spec.seed, int(i), "f1"),
            )
            predictions.append(score.value > tau_nll)
    coll, off = safety_rates(flags)
    cond, _, _ = window_cond(policy, index, int(picks[0]))
    times = timed_samples(policy, cond, spec.timing_samples, spec.seed)
    out = {
        "collision_rate": coll,
        "off_road_rate": off,
        "compute_mean_s": float(times.mean()),
        "compute_std_s": float(times.std()),
    }
    if tau_nll is not None:
        out["f1"] = f1_score(predictions, labels)
    return out


def run_experiment(
    spec: ExperimentSpec,
    cfg: RunConfig,
    train_set: DemoDataset,
    test_set: DemoDataset,
    tau_nll: float | None = None,
) -> dict:
    """Train each cell and measure it; returns the machine-readable report."""
    from ..pipeline import train_policy

    rows = []
    for cell in spec.cells:
        layout = cell.layout(cfg.latent_dim)
        policy, curve = train_policy(
            cfg, cell.role, train_set, layout=layout, t_obs=cell.t_obs, t_pred=cell.t_pred, epochs=spec.epochs
        )
        if cell.role == ROLE_EVALUATOR:
            metrics = _evaluator_metrics(policy, test_set, spec, cfg)
        else:
            metrics = _copilot_metrics(policy, test_set, spec, cfg, tau_nll)
        rows.append(
            {
                "cell": cell.name,
                "role": cell.role,
                "horizon": f"{cell.t_obs}/{cell.t_pred}",
                "final_train_loss": curve[-1],
                **metrics,
            }
        )
    return {
        "format_version": EXPERIMENT_FORMAT_VERSION,
        "spec": spec.to_dict(),
        "config": config_to_dict(cfg),
        "rows": rows,
    }


def report_table(report: dict) -> str:
    """Aligned-text rendering of a report."""
    rows = report["rows"]
    if not rows:
        return "(empty report)"
    keys = ["cell", "role", "horizon"] + [
        k for k in rows[0] if k not in ("cell", "role", "horizon")
    ]
    widths = {k: max(len(k), *(len(_fmt(r.get(k))) for r in rows)) for k in keys}
    lines = ["  ".join(k.ljust(widths[k]) for k in keys)]
    lines.append("  ".join("-" * widths[k] for k in keys))
    for r in rows:
        lines.append("  ".join(_fmt(r.get(k)).ljust(widths[k]) for k in keys))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def save_report(report: dict, path: str | Path) -> None:
    path = Path(path)
    path.write_text(json.dumps(report, indent=1))
    path.with_suffix(".txt").write_text(report_table(report) + "\n")
