"""Adaptive-moment optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamHyperparams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    hp: AdamHyperparams = AdamHyperparams(),
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update. Returns new parameter and state dicts (inputs untouched)."""
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    c1 = 1.0 - hp.beta1**t
    c2 = 1.0 - hp.beta2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {p.shape}")
        m = hp.beta1 * state.m.get(name, np.zeros_like(p)) + (1.0 - hp.beta1) * g
        v = hp.beta2 * state.v.get(name, np.zeros_like(p)) + (1.0 - hp.beta2) * g * g
        new_params[name] = p - hp.lr * (m / c1) / (np.sqrt(v / c2) + hp.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(t=t, m=new_m, v=new_v)
