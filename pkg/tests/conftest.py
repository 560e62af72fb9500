import numpy as np
import pytest

from diffsafe.diffusion import PolicyHead, ROLE_COPILOT, ROLE_EVALUATOR, cosine_schedule
from diffsafe.nn import ArchDescriptor, CondLayout, NormStats, init_denoiser


def tiny_policy(role: str, t_obs: int, t_pred: int, d_z: int = 4, K: int = 10, seed: int = 0, kind: str = "mlp"):
    """Small random-weight policy head for loop/service plumbing tests."""
    layout = CondLayout(t_obs=t_obs, latent_dim=d_z, include_actions=(role == ROLE_EVALUATOR))
    desc = ArchDescriptor(
        kind=kind,
        t_pred=t_pred,
        cond_dim=layout.dim,
        base_width=8,
        pe_dim=8,
        cond_embed_dim=8,
        mlp_width=32,
        mlp_layers=2,
    )
    norm = NormStats(
        state_mean=np.zeros(5),
        state_std=np.ones(5),
        action_mean=np.array([0.0, 0.4, 0.05]),
        action_std=np.array([0.4, 0.25, 0.1]),
    )
    return PolicyHead(
        role=role,
        weights=init_denoiser(desc, np.random.default_rng(seed)),
        schedule=cosine_schedule(K),
        t_obs=t_obs,
        t_pred=t_pred,
        layout=layout,
        norm=norm,
    )


@pytest.fixture
def tiny_policies():
    return tiny_policy(ROLE_EVALUATOR, t_obs=6, t_pred=8), tiny_policy(ROLE_COPILOT, t_obs=4, t_pred=5)
