"""Differentiable-network substrate: autodiff tensors, layers, denoisers, optimizer."""

from .autoencoder import (
    AEDescriptor,
    AutoencoderWeights,
    LatentVisual,
    decode_batch,
    encode,
    encode_batch,
    init_autoencoder,
    reconstruction_mse,
    train_autoencoder,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .conditioning import (
    ACTION_DIM,
    STATE_DIM,
    CondLayout,
    ConditioningVector,
    NormStats,
    build_conditioning,
    build_conditioning_batch,
)
from .denoiser import (
    ArchDescriptor,
    DenoiserWeights,
    ShapeMismatchError,
    denoise_predict,
    denoise_predict_batch,
    init_denoiser,
    loss_and_grads,
    make_echo,
    make_identity_linear,
)
from .layers import FiLMParams, film, pos_embed
from .optim import AdamHyperparams, AdamState, optimizer_step
from .tensor import Tensor, no_grad

__all__ = [
    "Tensor",
    "no_grad",
    "FiLMParams",
    "film",
    "pos_embed",
    "CondLayout",
    "ConditioningVector",
    "NormStats",
    "build_conditioning",
    "build_conditioning_batch",
    "STATE_DIM",
    "ACTION_DIM",
    "ArchDescriptor",
    "DenoiserWeights",
    "ShapeMismatchError",
    "init_denoiser",
    "denoise_predict",
    "denoise_predict_batch",
    "loss_and_grads",
    "make_identity_linear",
    "make_echo",
    "AdamHyperparams",
    "AdamState",
    "optimizer_step",
    "AEDescriptor",
    "AutoencoderWeights",
    "LatentVisual",
    "init_autoencoder",
    "encode",
    "encode_batch",
    "decode_batch",
    "train_autoencoder",
    "reconstruction_mse",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
]
