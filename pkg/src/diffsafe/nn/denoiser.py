"""Conditional noise-prediction networks over action sequences.

The default is a small 1D U-Net along the prediction-horizon axis: two
resolution levels of residual double-convolution blocks, FiLM conditioning in
every block, and a sinusoidal step embedding added to each block's input. An
MLP fallback and two degenerate kinds ("linear", "echo") sit behind the same
interface for cheap tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import affine_params, conv_params, pos_embed
from .tensor import (
    Tensor,
    affine,
    avg_pool1d_2,
    concat,
    conv1d,
    mean_all,
    no_grad,
    reshape,
    silu,
    square,
    transpose,
    upsample1d_2,
)

ACTION_DIM = 3


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ArchDescriptor:
    """Architecture identity of a denoiser; checkpoints refuse to load a mismatch."""

    kind: str  # "unet" | "mlp" | "linear" | "echo"
    t_pred: int
    cond_dim: int
    base_width: int = 32
    pe_dim: int = 32
    cond_embed_dim: int = 64
    mlp_width: int = 256
    mlp_layers: int = 3

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_pred": self.t_pred,
            "cond_dim": self.cond_dim,
            "base_width": self.base_width,
            "pe_dim": self.pe_dim,
            "cond_embed_dim": self.cond_embed_dim,
            "mlp_width": self.mlp_width,
            "mlp_layers": self.mlp_layers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchDescriptor":
        return cls(**d)


@dataclass
class DenoiserWeights:
    descriptor: ArchDescriptor
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "DenoiserWeights":
        return DenoiserWeights(self.descriptor, {k: v.copy() for k, v in self.params.items()})

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise ValueError(f"non-finite parameter: {name}")


_UNET_BLOCKS = (("enc1", 1, 1), ("mid", 1, 2), ("dec1", 3, 1))  # name, in/out width multipliers


def init_denoiser(descriptor: ArchDescriptor, rng: np.random.Generator) -> DenoiserWeights:
    d = descriptor
    p: dict[str, np.ndarray] = {}
    if d.kind == "unet":
        p["cond.w"], p["cond.b"] = affine_params(rng, d.cond_dim, d.cond_embed_dim)
        widths = {"enc1": (ACTION_DIM, d.base_width), "mid": (d.base_width, 2 * d.base_width)}
        widths["dec1"] = (2 * d.base_width + d.base_width, d.base_width)
        for name, (cin, cout) in widths.items():
            p[f"{name}.conv1.w"], p[f"{name}.conv1.b"] = conv_params(rng, cin, cout, 3)
            p[f"{name}.conv2.w"], p[f"{name}.conv2.b"] = conv_params(rng, cout, cout, 3)
            p[f"{name}.time.w"], p[f"{name}.time.b"] = affine_params(rng, d.pe_dim, cout)
            p[f"{name}.film_scale.w"], _ = affine_params(rng, d.cond_embed_dim, cout, scale=0.05)
            p[f"{name}.film_scale.b"] = np.ones(cout)  # identity-centred scale
            p[f"{name}.film_shift.w"], p[f"{name}.film_shift.b"] = affine_params(rng, d.cond_embed_dim, cout, scale=0.05)
            if cin != cout:
                p[f"{name}.skip.w"], p[f"{name}.skip.b"] = conv_params(rng, cin, cout, 1)
        p["out.w"], p["out.b"] = conv_params(rng, d.base_width, ACTION_DIM, 1, scale=0.02)
    elif d.kind == "mlp":
        p["cond.w"], p["cond.b"] = affine_params(rng, d.cond_dim, d.cond_embed_dim)
        d_in = ACTION_DIM * d.t_pred + d.pe_dim + d.cond_embed_dim
        prev = d_in
        for i in range(d.mlp_layers):
            p[f"h{i}.w"], p[f"h{i}.b"] = affine_params(rng, prev, d.mlp_width)
            prev = d.mlp_width
        p["out.w"], p["out.b"] = affine_params(rng, prev, ACTION_DIM * d.t_pred, scale=0.02)
    elif d.kind == "linear":
        p["out.w"], p["out.b"] = conv_params(rng, ACTION_DIM, ACTION_DIM, 1, scale=0.02)
    elif d.kind == "echo":
        # test stub: predicts x / sqrt(1 - alpha_bar[k]); scale table injected via set_echo_table
        p["inv_sigma"] = np.ones(1)
    else:
        raise ValueError(f"unknown denoiser kind: {d.kind}")
    return DenoiserWeights(descriptor=d, params=p)


def make_identity_linear(t_pred: int, cond_dim: int = 0) -> DenoiserWeights:
    """A 'linear' denoiser initialized to the exact identity map."""
    w = DenoiserWeights(ArchDescriptor(kind="linear", t_pred=t_pred, cond_dim=cond_dim))
    w.params["out.w"] = np.eye(ACTION_DIM)[:, :, None].astype(np.float64)
    w.params["out.b"] = np.zeros(ACTION_DIM)
    return w


def make_echo(t_pred: int, alpha_bar: np.ndarray, cond_dim: int = 0) -> DenoiserWeights:
    """A stub that returns the exact injected noise when the clean signal is zero."""
    w = DenoiserWeights(ArchDescriptor(kind="echo", t_pred=t_pred, cond_dim=cond_dim))
    sig = np.sqrt(np.maximum(1.0 - np.asarray(alpha_bar, dtype=np.float64), 1e-300))
    w.params["inv_sigma"] = 1.0 / sig
    return w


def _unet_block(p, name: str, x: Tensor, pe_proj: Tensor, scale: Tensor, shift: Tensor, has_skip: bool) -> Tensor:
    h = conv1d(x, p[f"{name}.conv1.w"], p[f"{name}.conv1.b"], pad=1)
    h = h + reshape(pe_proj, (pe_proj.shape[0], pe_proj.shape[1], 1))
    h = h * reshape(scale, (scale.shape[0], scale.shape[1], 1)) + reshape(shift, (shift.shape[0], shift.shape[1], 1))
    h = silu(h)
    h = conv1d(h, p[f"{name}.conv2.w"], p[f"{name}.conv2.b"], pad=1)
    h = silu(h)
    res = conv1d(x, p[f"{name}.skip.w"], p[f"{name}.skip.b"], pad=0) if has_skip else x
    return h + res


def _forward(w: DenoiserWeights, params, x: Tensor, k: np.ndarray, cond: Tensor) -> Tensor:
    """Batched forward pass: x is (B, T, 3) as a Tensor, k is (B,) ints, cond (B, D)."""
    d = w.descriptor
    p = params
    B, T, A = x.shape
    if d.kind == "echo":
        table = w.params["inv_sigma"]
        scale = table[np.clip(k, 0, len(table) - 1)]
        return x * Tensor(scale[:, None, None])
    if d.kind == "linear":
        xc = transpose(x, (0, 2, 1))
        out = conv1d(xc, p["out.w"], p["out.b"], pad=0)
        return transpose(out, (0, 2, 1))

    pe = Tensor(pos_embed(k, d.pe_dim))  # (B, pe_dim), constant w.r.t. parameters
    ce = silu(affine(cond, p["cond.w"], p["cond.b"]))

    if d.kind == "mlp":
        flat = reshape(x, (B, T * A))
        h = concat([flat, pe, ce], axis=1)
        for i in range(d.mlp_layers):
            h = silu(affine(h, p[f"h{i}.w"], p[f"h{i}.b"]))
        out = affine(h, p["out.w"], p["out.b"])
        return reshape(out, (B, T, A))

    xc = transpose(x, (0, 2, 1))  # (B, 3, T)
    feats = {}
    h = xc
    for name, _, _ in _UNET_BLOCKS:
        if name == "mid":
            feats["enc1"] = h
            h = avg_pool1d_2(h)
        elif name == "dec1":
            h = upsample1d_2(h, T)
            h = concat([h, feats["enc1"]], axis=1)
        pe_proj = affine(pe, p[f"{name}.time.w"], p[f"{name}.time.b"])
        scale = affine(ce, p[f"{name}.film_scale.w"], p[f"{name}.film_scale.b"])
        shift = affine(ce, p[f"{name}.film_shift.w"], p[f"{name}.film_shift.b"])
        has_skip = f"{name}.skip.w" in w.params
        h = _unet_block(p, name, h, pe_proj, scale, shift, has_skip)
    out = conv1d(h, p["out.w"], p["out.b"], pad=0)
    return transpose(out, (0, 2, 1))


def _check_inputs(w: DenoiserWeights, noisy: np.ndarray, cond: np.ndarray | None) -> None:
    d = w.descriptor
    if noisy.shape[-2:] != (d.t_pred, ACTION_DIM):
        raise ShapeMismatchError(f"sequence shape {noisy.shape} does not match (t_pred={d.t_pred}, {ACTION_DIM})")
    if d.kind in ("unet", "mlp"):
        if cond is None or cond.shape[-1] != d.cond_dim:
            got = None if cond is None else cond.shape[-1]
            raise ShapeMismatchError(f"conditioning dim {got} does not match descriptor {d.cond_dim}")


def denoise_predict(w: DenoiserWeights, noisy_seq: np.ndarray, k: int, cond: np.ndarray | None = None) -> np.ndarray:
    """Predict the injected noise for one (t_pred, 3) sequence at diffusion step k."""
    noisy_seq = np.asarray(noisy_seq, dtype=np.float64)
    cond_arr = None if cond is None else np.asarray(cond, dtype=np.float64)
    _check_inputs(w, noisy_seq, cond_arr)
    with no_grad():
        out = _forward(
            w,
            w.params,
            Tensor(noisy_seq[None]),
            np.array([k]),
            Tensor(np.zeros((1, 0)) if cond_arr is None else cond_arr[None]),
        )
    return out.data[0]


def denoise_predict_batch(w: DenoiserWeights, noisy: np.ndarray, k: np.ndarray, cond: np.ndarray) -> np.ndarray:
    """Batched inference path: noisy (B, T, 3), k (B,), cond (B, D)."""
    _check_inputs(w, noisy, cond)
    with no_grad():
        out = _forward(w, w.params, Tensor(noisy), np.asarray(k), Tensor(cond))
    return out.data


def loss_and_grads(
    w: DenoiserWeights,
    clean: np.ndarray,
    k: np.ndarray,
    noise: np.ndarray,
    cond: np.ndarray,
    alpha_bar: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared noise-prediction loss and gradients for every parameter.

    The batch is corrupted internally: x_k = sqrt(ab[k]) * clean + sqrt(1-ab[k]) * noise.
    """
    clean = np.asarray(clean, dtype=np.float64)
    if clean.ndim != 3 or clean.shape[0] == 0:
        raise ValueError("batch must be a nonempty (B, T, 3) array")
    _check_inputs(w, clean, np.asarray(cond))
    ab = np.asarray(alpha_bar, dtype=np.float64)[np.asarray(k)]
    noisy = np.sqrt(ab)[:, None, None] * clean + np.sqrt(1.0 - ab)[:, None, None] * noise

    params = {name: Tensor(value, requires_grad=True) for name, value in w.params.items()}
    pred = _forward(w, params, Tensor(noisy), np.asarray(k), Tensor(cond))
    loss = mean_all(square(pred - Tensor(noise)))
    if not np.isfinite(loss.data):
        norms = {name: float(np.abs(v).max()) for name, v in w.params.items()}
        raise FloatingPointError(f"non-finite diffusion loss; max |param| by tensor: {norms}")
    loss.backward()
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in params.items()
    }
    return float(loss.data), grads
