"""Layer-level building blocks: FiLM, positional embedding, initializers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, as_tensor, mul


@dataclass(frozen=True)
class FiLMParams:
    """Per-feature scale and shift produced from a conditioning vector."""

    scale: np.ndarray
    shift: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.scale) != np.shape(self.shift):
            raise ValueError("FiLM scale and shift must have the same shape")


def film(x, params: FiLMParams):
    """Feature-wise linear modulation: scale * x + shift, elementwise."""
    x = as_tensor(x)
    if x.shape[-1] != np.shape(params.scale)[-1]:
        raise ValueError(
            f"FiLM dimension mismatch: features {x.shape[-1]}, params {np.shape(params.scale)[-1]}"
        )
    return add(mul(x, as_tensor(params.scale)), as_tensor(params.shift))


def pos_embed(k, dim: int) -> np.ndarray:
    """Sinusoidal step embedding: pairs (sin(k/w_i), cos(k/w_i)), w_i = 10000^(2i/dim).

    `k` may be a scalar or an integer array; the result has shape (..., dim).
    """
    if dim % 2 != 0:
        raise ValueError(f"embedding dim must be even, got {dim}")
    k_arr = np.asarray(k, dtype=np.float64)
    if np.any(k_arr < 0):
        raise ValueError("step index must be >= 0")
    i = np.arange(dim // 2)
    omega = 10000.0 ** (2.0 * i / dim)
    phase = k_arr[..., None] / omega
    out = np.empty(phase.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(phase)
    out[..., 1::2] = np.cos(phase)
    return out


def he_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def affine_params(rng: np.random.Generator, d_in: int, d_out: int, scale: float | None = None):
    w = he_init(rng, (d_in, d_out), d_in) if scale is None else rng.normal(0.0, scale, (d_in, d_out))
    return w, np.zeros(d_out)


def conv_params(rng: np.random.Generator, c_in: int, c_out: int, k: int, scale: float | None = None):
    fan_in = c_in * k
    w = he_init(rng, (c_out, c_in, k), fan_in) if scale is None else rng.normal(0.0, scale, (c_out, c_in, k))
    return w, np.zeros(c_out)
