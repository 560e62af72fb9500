"""End-to-end build steps shared by the CLI, the experiment runner, and the tests."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .autonomy.handover import HandoverConfig
from .autonomy.scoring import calibrate_threshold
from .config import RunConfig
from .diffusion.policy import (
    ROLE_COPILOT,
    ROLE_EVALUATOR,
    PolicyHead,
    load_policy,
    save_policy,
)
from .diffusion.schedule import cosine_schedule
from .diffusion.training import TrainConfig, train
from .drivers.dataset import KIND_COPILOT, KIND_EVAL, DemoDataset, load_dataset, save_dataset
from .drivers.episodes import Episode, record_episode
from .drivers.policies import ExpertDriver, HumanConfig, HumanDriver
from .harness.benchmark import StackArtifacts
from .nn import (
    AdamHyperparams,
    AEDescriptor,
    ArchDescriptor,
    AutoencoderWeights,
    CondLayout,
    encode_batch,
    init_denoiser,
    load_checkpoint,
    save_checkpoint,
    train_autoencoder,
)
from .seeding import rng_for
from .sim.track import Track, generate_track


def make_tracks(cfg: RunConfig) -> list[Track]:
    return [generate_track(cfg.seed * 1000 + i, cfg.track) for i in range(cfg.data.n_tracks)]


class _NoisyExpertDriver(HumanDriver):
    """Mild steering noise, no lapses: safe recovery coverage for the expert set."""

    tag = "expert"

    def __init__(self, sim_cfg, rng, sigma, expert):
        super().__init__(sim_cfg, rng, HumanConfig(ou_sigma=sigma, p_lapse=0.0, expert=expert))


def collect_dataset(cfg: RunConfig, kind: str, tracks: list[Track] | None = None) -> DemoDataset:
    """Record demonstration episodes across the track suite.

    Expert episodes that fail the safety ingest (rare, with steering noise) are
    re-rolled with a fresh substream so the copilot set is always clean.
    """
    tracks = tracks if tracks is not None else make_tracks(cfg)
    per_track = cfg.data.episodes_per_track_copilot if kind == KIND_COPILOT else cfg.data.episodes_per_track_eval
    episodes: list[Episode] = []
    track_map = {t.seed: t for t in tracks}
    for t_idx, track in enumerate(tracks):
        for e_idx in range(per_track):
            for attempt in range(8):
                rng = rng_for(cfg.seed, kind, t_idx, e_idx, attempt)
                start_s = float(rng.uniform(0, track.total_length))
                if kind == KIND_COPILOT:
                    if e_idx % 2 == 1 and cfg.data.noisy_expert_fraction > 0:
                        driver = _NoisyExpertDriver(cfg.sim, rng, cfg.data.noisy_expert_sigma, cfg.expert)
                    else:
                        driver = ExpertDriver(cfg.sim, cfg.expert)
                else:
                    driver = HumanDriver(cfg.sim, rng, cfg.human)
                ep = record_episode(
                    driver,
                    track,
                    horizon=cfg.data.episode_horizon,
                    cfg=cfg.sim,
                    raster_size=cfg.raster.size,
                    raster_resolution=cfg.raster.resolution,
                    start_arclength=start_s,
                )
                if kind == KIND_EVAL:
                    episodes.append(ep)
                    break
                from .drivers.dataset import unsafe_steps

                if not unsafe_steps(ep, track, cfg.car_radius):
                    episodes.append(ep)
                    break
            else:
                raise RuntimeError(f"could not record a safe expert episode on track {track.seed}")
        if kind == KIND_COPILOT:
            episodes.extend(_recovery_episodes(cfg, track, t_idx))
    return DemoDataset.from_episodes(episodes, kind, cfg.track, cfg.car_radius, tracks=track_map)


def _recovery_episodes(cfg: RunConfig, track: Track, t_idx: int) -> list[Episode]:
    """Expert rejoining the line from offset starts: edge-recovery coverage.

    Half the starts are uniform along the track; the rest sit a few metres
    before an obstacle so imperfect approach states are in the data too.
    """
    from .drivers.dataset import unsafe_steps
    from .drivers.episodes import start_state
    from .sim.geometry import nearest_on_polyline

    d = cfg.data
    starts: list[tuple[str, float | int]] = [("uniform", r) for r in range(d.recovery_episodes_per_track)]
    starts += [("obstacle", o) for o in range(len(track.obstacles))]
    out: list[Episode] = []
    for kind_tag, r_idx in starts:
        for attempt in range(12):
            rng = rng_for(cfg.seed, "recovery", kind_tag, t_idx, int(r_idx), attempt)
            if kind_tag == "obstacle":
                ob = track.obstacles[int(r_idx)]
                _, s_ob, _ = nearest_on_polyline(
                    np.array([ob.x, ob.y]), track.centerline, track.arclength
                )
                s0 = float((s_ob - rng.uniform(6.0, 12.0)) % track.total_length)
                lateral = float(rng.uniform(-1.2, 1.2))
            else:
                s0 = float(rng.uniform(0, track.total_length))
                lateral = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, d.recovery_offset_max))
            heading = float(rng.uniform(-d.recovery_heading_error, d.recovery_heading_error))
            init = start_state(track, s0, lateral_offset=lateral, heading_error=heading, speed=d.recovery_speed)
            ep = record_episode(
                ExpertDriver(cfg.sim, cfg.expert),
                track,
                horizon=d.recovery_horizon,
                cfg=cfg.sim,
                raster_size=cfg.raster.size,
                raster_resolution=cfg.raster.resolution,
                initial_state=init,
            )
            if not unsafe_steps(ep, track, cfg.car_radius):
                out.append(ep)
                break
    return out


def train_raster_autoencoder(cfg: RunConfig, dataset: DemoDataset, max_patches: int = 4000) -> AutoencoderWeights:
    rng = rng_for(cfg.seed, "autoencoder")
    all_rasters = np.concatenate([ep.rasters for ep in dataset.episodes], axis=0)
    if len(all_rasters) > max_patches:
        idx = rng.choice(len(all_rasters), size=max_patches, replace=False)
        all_rasters = all_rasters[idx]
    desc = AEDescriptor(
        channels=2,
        height=cfg.raster.size,
        width=cfg.raster.size,
        hidden=cfg.training.ae_hidden,
        latent_dim=cfg.latent_dim,
    )
    weights, _curve = train_autoencoder(
        all_rasters.astype(np.float64),
        desc,
        epochs=cfg.training.ae_epochs,
        rng=rng,
    )
    return weights


def encode_dataset_latents(dataset: DemoDataset, encoder: AutoencoderWeights, batch: int = 512) -> None:
    """Attach encoder latents to every episode in place."""
    for ep in dataset.episodes:
        outs = []
        for lo in range(0, len(ep.rasters), batch):
            outs.append(encode_batch(encoder, ep.rasters[lo : lo + batch].astype(np.float64)))
        ep.latents = np.concatenate(outs, axis=0)


def build_policy(cfg: RunConfig, role: str, layout: CondLayout | None = None, t_obs: int | None = None, t_pred: int | None = None) -> PolicyHead:
    """Fresh, untrained policy head from the config defaults (or overrides)."""
    h = cfg.horizons
    if role == ROLE_EVALUATOR:
        t_obs = t_obs or h.evaluator_obs
        t_pred = t_pred or h.evaluator_pred
        layout = layout or CondLayout(t_obs=t_obs, latent_dim=cfg.latent_dim, include_actions=True)
    else:
        t_obs = t_obs or h.copilot_obs
        t_pred = t_pred or h.copilot_pred
        layout = layout or CondLayout(t_obs=t_obs, latent_dim=cfg.latent_dim, include_actions=False)
    desc = ArchDescriptor(
        kind=cfg.net.kind,
        t_pred=t_pred,
        cond_dim=layout.dim,
        base_width=cfg.net.base_width,
        pe_dim=cfg.net.pe_dim,
        cond_embed_dim=cfg.net.cond_embed_dim,
        mlp_width=cfg.net.mlp_width,
        mlp_layers=cfg.net.mlp_layers,
    )
    rng = rng_for(cfg.seed, "init", role, t_obs, t_pred)
    norm = None  # filled at train time from the dataset
    return PolicyHead(
        role=role,
        weights=init_denoiser(desc, rng),
        schedule=cosine_schedule(cfg.schedule_steps),
        t_obs=t_obs,
        t_pred=t_pred,
        layout=layout,
        norm=norm,  # type: ignore[arg-type]
    )


def train_policy(cfg: RunConfig, role: str, dataset: DemoDataset, layout: CondLayout | None = None, t_obs: int | None = None, t_pred: int | None = None, epochs: int | None = None) -> tuple[PolicyHead, list[float]]:
    policy = build_policy(cfg, role, layout, t_obs, t_pred)
    policy.norm = dataset.norm
    if epochs is None:
        epochs = cfg.training.evaluator_epochs if role == ROLE_EVALUATOR else cfg.training.policy_epochs
    tc = TrainConfig(
        epochs=epochs,
        batch_size=cfg.training.batch_size,
        hp=AdamHyperparams(lr=cfg.training.learning_rate),
        max_windows_per_epoch=cfg.training.max_windows_per_epoch,
        ema_decay=cfg.training.ema_decay,
        obs_dropout=cfg.training.evaluator_obs_dropout if role == ROLE_EVALUATOR else 0.0,
    )
    rng = rng_for(cfg.seed, "train", role, policy.t_obs, policy.t_pred)
    return train(policy, dataset, tc, rng)


def calibrate(cfg: RunConfig, copilot: PolicyHead, validation: DemoDataset) -> float:
    return calibrate_threshold(copilot, validation, cfg.handover.calibration_percentile, seed=cfg.seed)


def handover_config(cfg: RunConfig, tau_nll: float) -> HandoverConfig:
    return HandoverConfig(
        tau_nll=tau_nll,
        gamma0=cfg.handover.gamma0,
        ramp_steps=cfg.handover.ramp_steps,
        score_window=cfg.handover.score_window,
    )


def build_stack(cfg: RunConfig, evaluator: PolicyHead, copilot: PolicyHead, encoder: AutoencoderWeights | None, tau_nll: float) -> StackArtifacts:
    return StackArtifacts(
        evaluator=evaluator,
        copilot=copilot,
        encoder=encoder,
        sim_cfg=cfg.sim,
        track_params=cfg.track,
        handover=handover_config(cfg, tau_nll),
        expert=cfg.expert,
    )


# -- checkpoint helpers -----------------------------------------------------------


def save_autoencoder(path: str | Path, w: AutoencoderWeights) -> None:
    save_checkpoint(path, "autoencoder", w.descriptor.to_dict(), w.params)


def load_autoencoder(path: str | Path) -> AutoencoderWeights:
    desc, arrays, _ = load_checkpoint(path, expect_kind="autoencoder")
    return AutoencoderWeights(AEDescriptor.from_dict(desc), arrays)
