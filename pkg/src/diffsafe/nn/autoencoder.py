"""Raster autoencoder: flattened MLP encoder with a tanh-bounded latent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import affine_params
from .optim import AdamHyperparams, AdamState, optimizer_step
from .tensor import Tensor, affine, mean_all, no_grad, sigmoid, silu, square, tanh


@dataclass(frozen=True)
class LatentVisual:
    """Latent visual context vector produced by a trained encoder."""

    z: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.z)):
            raise ValueError("latent contains non-finite entries")


@dataclass(frozen=True)
class AEDescriptor:
    channels: int = 2
    height: int = 32
    width: int = 32
    hidden: int = 256
    latent_dim: int = 32

    @property
    def flat_dim(self) -> int:
        return self.channels * self.height * self.width

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "height": self.height,
            "width": self.width,
            "hidden": self.hidden,
            "latent_dim": self.latent_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AEDescriptor":
        return cls(**d)


@dataclass
class AutoencoderWeights:
    descriptor: AEDescriptor
    params: dict[str, np.ndarray] = field(default_factory=dict)


def init_autoencoder(descriptor: AEDescriptor, rng: np.random.Generator) -> AutoencoderWeights:
    d = descriptor
    p: dict[str, np.ndarray] = {}
    p["enc1.w"], p["enc1.b"] = affine_params(rng, d.flat_dim, d.hidden)
    p["enc2.w"], p["enc2.b"] = affine_params(rng, d.hidden, d.latent_dim)
    p["dec1.w"], p["dec1.b"] = affine_params(rng, d.latent_dim, d.hidden)
    p["dec2.w"], p["dec2.b"] = affine_params(rng, d.hidden, d.flat_dim)
    return AutoencoderWeights(descriptor=d, params=p)


def _encode_t(params, flat: Tensor) -> Tensor:
    h = silu(affine(flat, params["enc1.w"], params["enc1.b"]))
    return tanh(affine(h, params["enc2.w"], params["enc2.b"]))


def _decode_t(params, z: Tensor) -> Tensor:
    h = silu(affine(z, params["dec1.w"], params["dec1.b"]))
    return sigmoid(affine(h, params["dec2.w"], params["dec2.b"]))


def _check_patch_shape(w: AutoencoderWeights, patches: np.ndarray) -> None:
    d = w.descriptor
    if patches.shape[-3:] != (d.channels, d.height, d.width):
        raise ValueError(f"patch shape {patches.shape} does not match descriptor {(d.channels, d.height, d.width)}")


def encode_batch(w: AutoencoderWeights, patches: np.ndarray) -> np.ndarray:
    """(N, C, H, W) grids -> (N, d_z) latents. Deterministic."""
    patches = np.asarray(patches, dtype=np.float64)
    _check_patch_shape(w, patches)
    flat = patches.reshape(patches.shape[0], -1)
    with no_grad():
        return _encode_t(w.params, Tensor(flat)).data


def encode(w: AutoencoderWeights, patch) -> LatentVisual:
    """Encode a single RasterPatch (or raw (C, H, W) grid) into its latent."""
    grid = np.asarray(getattr(patch, "grid", patch), dtype=np.float64)
    return LatentVisual(z=encode_batch(w, grid[None])[0])


def decode_batch(w: AutoencoderWeights, z: np.ndarray) -> np.ndarray:
    d = w.descriptor
    with no_grad():
        flat = _decode_t(w.params, Tensor(np.asarray(z, dtype=np.float64))).data
    return flat.reshape(-1, d.channels, d.height, d.width)


def reconstruction_mse(w: AutoencoderWeights, patches: np.ndarray) -> float:
    patches = np.asarray(patches, dtype=np.float64)
    recon = decode_batch(w, encode_batch(w, patches))
    return float(np.mean((recon - patches) ** 2))


def train_autoencoder(
    patches: np.ndarray,
    descriptor: AEDescriptor = AEDescriptor(),
    epochs: int = 20,
    batch_size: int = 64,
    hp: AdamHyperparams = AdamHyperparams(),
    rng: np.random.Generator | None = None,
) -> tuple[AutoencoderWeights, list[float]]:
    """Train on MSE reconstruction; returns weights and the per-epoch loss curve."""
    rng = np.random.default_rng(0) if rng is None else rng
    patches = np.asarray(patches, dtype=np.float64)
    w = init_autoencoder(descriptor, rng)
    _check_patch_shape(w, patches)
    flat_all = patches.reshape(patches.shape[0], -1)
    state = AdamState()
    curve: list[float] = []
    n = len(flat_all)
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            batch = Tensor(flat_all[idx])
            params = {k: Tensor(v, requires_grad=True) for k, v in w.params.items()}
            recon = _decode_t(params, _encode_t(params, batch))
            loss = mean_all(square(recon - batch))
            loss.backward()
            grads = {k: t.grad for k, t in params.items()}
            w.params, state = optimizer_step(w.params, grads, state, hp)
            losses.append(float(loss.data))
        curve.append(float(np.mean(losses)))
    return w, curve
