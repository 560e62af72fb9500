"""Cosine noise schedule and the forward/reverse diffusion primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

COSINE_OFFSET = 0.008
BETA_MIN = 1e-6
BETA_MAX = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step coefficients, index 0..K. alpha_bar[0] is defined as exactly 1."""

    K: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sqrt_alpha_bar: np.ndarray = field(init=False, repr=False)
    sqrt_one_minus_alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if np.any(self.beta[1:] <= 0) or np.any(self.beta[1:] >= 1):
            raise ValueError("beta must lie in (0, 1) for k >= 1")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if self.alpha_bar[-1] >= 1e-3:
            raise ValueError(f"alpha_bar[K] must be < 1e-3, got {self.alpha_bar[-1]:.2e}")
        object.__setattr__(self, "sqrt_alpha_bar", np.sqrt(self.alpha_bar))
        object.__setattr__(self, "sqrt_one_minus_alpha_bar", np.sqrt(1.0 - self.alpha_bar))

    def schedule_alpha(self, k: int) -> float:
        """Reverse-update gain 1/sqrt(alpha_k)."""
        return 1.0 / math.sqrt(self.alpha[k])

    def schedule_gamma(self, k: int) -> float:
        """Noise-prediction coefficient beta_k / sqrt(1 - alpha_bar_k)."""
        return self.beta[k] / math.sqrt(1.0 - self.alpha_bar[k])

    def sigma(self, k: int) -> float:
        """Posterior standard deviation sqrt(beta_k * (1 - alpha_bar_{k-1}) / (1 - alpha_bar_k))."""
        return math.sqrt(self.beta[k] * (1.0 - self.alpha_bar[k - 1]) / (1.0 - self.alpha_bar[k]))

    def to_dict(self) -> dict:
        return {"kind": "cosine", "K": self.K}


def cosine_schedule(K: int) -> NoiseSchedule:
    """Squared-cosine alpha_bar profile, normalized so alpha_bar[0] == 1.

    Betas derived from consecutive alpha_bar ratios are clipped to
    [1e-6, 0.999] and alpha_bar is rebuilt as their cumulative product so the
    forward/reverse algebra stays exactly consistent.
    """
    if K < 2:
        raise ValueError(f"schedule needs K >= 2, got {K}")
    k = np.arange(K + 1, dtype=np.float64)
    f = np.cos(((k / K + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)) * math.pi / 2.0) ** 2
    ab_raw = f / f[0]
    beta = np.zeros(K + 1)
    beta[1:] = np.clip(1.0 - ab_raw[1:] / ab_raw[:-1], BETA_MIN, BETA_MAX)
    alpha = 1.0 - beta
    alpha[0] = 1.0
    alpha_bar = np.cumprod(alpha)
    alpha_bar[0] = 1.0
    return NoiseSchedule(K=K, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def forward_corrupt(x0: np.ndarray, k: int, noise: np.ndarray, sch: NoiseSchedule) -> np.ndarray:
    """Closed-form jump to step k: sqrt(ab_k) x0 + sqrt(1 - ab_k) noise."""
    if not 0 <= k <= sch.K:
        raise ValueError(f"step k={k} outside [0, {sch.K}]")
    if k == 0:
        return x0.copy()
    return sch.sqrt_alpha_bar[k] * x0 + sch.sqrt_one_minus_alpha_bar[k] * noise


def reverse_step(x_k: np.ndarray, k: int, eps_hat: np.ndarray, sch: NoiseSchedule, fresh_noise: np.ndarray | None = None) -> np.ndarray:
    """One posterior-mean update; the fresh-noise term is suppressed at k == 1."""
    if k < 1 or k > sch.K:
        raise ValueError(f"reverse step k={k} outside [1, {sch.K}]")
    mean = sch.schedule_alpha(k) * (x_k - sch.schedule_gamma(k) * eps_hat)
    if k == 1 or fresh_noise is None:
        return mean
    return mean + sch.sigma(k) * fresh_noise
