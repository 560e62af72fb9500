"""Command-line operator surface for the whole stack."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .drivers.dataset import KIND_COPILOT, KIND_EVAL, load_dataset, save_dataset
from .diffusion.policy import load_policy, save_policy
from .sim.track import generate_track, save_track


def _seed_for(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DIFFSAFE_SEED")
    if env is not None:
        return int(env)
    return cfg.seed


def _with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, seed=seed)


def _load_stack(cfg: RunConfig, stack_dir: Path):
    from .pipeline import build_stack, load_autoencoder

    evaluator = load_policy(stack_dir / "evaluator.ckpt")
    copilot = load_policy(stack_dir / "copilot.ckpt")
    encoder = load_autoencoder(stack_dir / "autoencoder.ckpt")
    tau = json.loads((stack_dir / "threshold.json").read_text())["tau_nll"]
    return build_stack(cfg, evaluator, copilot, encoder, tau)


def cmd_gen_tracks(args) -> int:
    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        track = generate_track(cfg.seed * 1000 + i, cfg.track)
        save_track(track, out / f"track_{i:03d}.json")
    print(f"wrote {args.count} tracks to {out}")
    return 0


def cmd_collect(args) -> int:
    from .pipeline import collect_dataset

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    kind = {"eval": KIND_EVAL, "copilot": KIND_COPILOT}[args.kind]
    ds = collect_dataset(cfg, kind)
    save_dataset(ds, args.out)
    print(f"collected {len(ds.episodes)} {kind} episodes into {args.out}")
    return 0


def cmd_train_ae(args) -> int:
    from .pipeline import save_autoencoder, train_raster_autoencoder

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    ds = load_dataset(args.dataset)
    w = train_raster_autoencoder(cfg, ds)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_autoencoder(args.out, w)
    print(f"autoencoder checkpoint: {args.out}")
    return 0


def _cmd_train_policy(args, role: str) -> int:
    from .pipeline import encode_dataset_latents, load_autoencoder, train_policy

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    ds = load_dataset(args.dataset)
    encoder = load_autoencoder(args.ae)
    encode_dataset_latents(ds, encoder)
    policy, curve = train_policy(cfg, role, ds, epochs=args.epochs)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_policy(args.out, policy)
    print(f"{role} checkpoint: {args.out} (loss {curve[0]:.4f} -> {curve[-1]:.4f})")
    return 0


def cmd_calibrate(args) -> int:
    from .pipeline import encode_dataset_latents, load_autoencoder
    from .autonomy.scoring import calibrate_threshold

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    ds = load_dataset(args.dataset)
    encoder = load_autoencoder(args.ae)
    encode_dataset_latents(ds, encoder)
    copilot = load_policy(args.copilot)
    pct = args.percentile if args.percentile is not None else cfg.handover.calibration_percentile
    tau = calibrate_threshold(copilot, ds, pct, seed=cfg.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps({"tau_nll": tau, "percentile": pct, "seed": cfg.seed}))
    print(f"tau_nll = {tau:.6f} (p{pct}) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from .harness.experiments import (
        CellSpec,
        ExperimentSpec,
        report_table,
        run_experiment,
        save_report,
    )
    from .pipeline import encode_dataset_latents, load_autoencoder

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    train_set = load_dataset(args.train_dataset)
    test_set = load_dataset(args.test_dataset)
    encoder = load_autoencoder(args.ae)
    encode_dataset_latents(train_set, encoder)
    encode_dataset_latents(test_set, encoder)
    tau = None
    if args.threshold:
        tau = json.loads(Path(args.threshold).read_text())["tau_nll"]
    if args.experiment:
        spec = ExperimentSpec.from_dict(json.loads(Path(args.experiment).read_text()))
    else:
        role = args.role
        h = cfg.horizons
        t_obs, t_pred = (h.evaluator_obs, h.evaluator_pred) if role == "evaluator" else (h.copilot_obs, h.copilot_pred)
        spec = ExperimentSpec(
            name=f"default-{role}",
            cells=(CellSpec(name="default", role=role, t_obs=t_obs, t_pred=t_pred),),
            epochs=args.epochs,
            seed=cfg.seed,
        )
    report = run_experiment(spec, cfg, train_set, test_set, tau_nll=tau)
    save_report(report, args.out)
    print(report_table(report))
    return 0


def cmd_sweep_gamma0(args) -> int:
    from .harness.benchmark import gamma0_sweep

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    stack = _load_stack(cfg, Path(args.stack))
    grid = [float(g) for g in args.grid.split(",")]
    track_seeds = [cfg.seed * 1000 + i for i in range(cfg.data.n_tracks)]
    rows = gamma0_sweep(stack, grid, track_seeds, args.trials, cfg.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps({"rows": rows}, indent=1))
    for r in rows:
        print(
            f"gamma0={r['gamma0']:.2f}  smoothness={r['mean_smoothness']:.4f}  "
            f"unsafe_rate={r['unsafe_rate']:.3f}  success={r['handover_success_rate']:.3f}"
        )
    return 0


def cmd_handover_bench(args) -> int:
    from .harness.benchmark import handover_benchmark

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    stack = _load_stack(cfg, Path(args.stack))
    track_seeds = [cfg.seed * 1000 + i for i in range(cfg.data.n_tracks)]
    _trials, summary = handover_benchmark(stack, track_seeds, args.trials, cfg.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary, indent=1))
    return 0


def cmd_serve(args) -> int:
    from .autonomy.loop import LoopConfig
    from .drivers.episodes import start_state
    from .service import LiveServer

    cfg = _with_seed(load_config(args.config), _seed_for(args, load_config(args.config)))
    stack = _load_stack(cfg, Path(args.stack))
    track = generate_track(args.track_seed if args.track_seed is not None else cfg.seed * 1000, cfg.track)
    loop_cfg = LoopConfig(
        replan_interval=cfg.handover.replan_interval,
        raster_size=cfg.raster.size,
        raster_resolution=cfg.raster.resolution,
        car_radius=cfg.car_radius,
    )
    server = LiveServer(
        track=track,
        car=start_state(track, 0.0),
        evaluator=stack.evaluator,
        copilot=stack.copilot,
        handover_cfg=stack.handover,
        sim_cfg=cfg.sim,
        loop_cfg=loop_cfg,
        encoder=stack.encoder,
        seed=cfg.seed,
        port=args.port,
        lockstep=args.lockstep,
        max_ticks=args.max_ticks,
        log_path=args.log,
    )
    print(f"serving on port {server.port} (lockstep={args.lockstep})", flush=True)
    server.run()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffsafe", description="Shared-autonomy driving stack")
    p.add_argument("--config", default=None, help="path to a RunConfig JSON file")
    p.add_argument("--seed", type=int, default=None, help="overrides config seed (env DIFFSAFE_SEED is the fallback)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-tracks", help="write deterministic track JSON files")
    g.add_argument("--count", type=int, default=15)
    g.add_argument("--out", default="runs/tracks")
    g.set_defaults(fn=cmd_gen_tracks)

    c = sub.add_parser("collect", help="record a demonstration dataset")
    c.add_argument("--kind", choices=["eval", "copilot"], required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_collect)

    a = sub.add_parser("train-ae", help="train the raster autoencoder")
    a.add_argument("--dataset", required=True)
    a.add_argument("--out", default="runs/stack/autoencoder.ckpt")
    a.set_defaults(fn=cmd_train_ae)

    te = sub.add_parser("train-eval", help="train the long-horizon behavior predictor")
    te.add_argument("--dataset", required=True)
    te.add_argument("--ae", required=True)
    te.add_argument("--epochs", type=int, default=None)
    te.add_argument("--out", default="runs/stack/evaluator.ckpt")
    te.set_defaults(fn=lambda args: _cmd_train_policy(args, "evaluator"))

    tc = sub.add_parser("train-copilot", help="train the short-horizon expert policy")
    tc.add_argument("--dataset", required=True)
    tc.add_argument("--ae", required=True)
    tc.add_argument("--epochs", type=int, default=None)
    tc.add_argument("--out", default="runs/stack/copilot.ckpt")
    tc.set_defaults(fn=lambda args: _cmd_train_policy(args, "copilot"))

    cal = sub.add_parser("calibrate", help="set the handover threshold from expert data")
    cal.add_argument("--copilot", required=True)
    cal.add_argument("--ae", required=True)
    cal.add_argument("--dataset", required=True)
    cal.add_argument("--percentile", type=float, default=None)
    cal.add_argument("--out", default="runs/stack/threshold.json")
    cal.set_defaults(fn=cmd_calibrate)

    ev = sub.add_parser("evaluate", help="metric report for a policy or an ablation grid")
    ev.add_argument("--role", choices=["evaluator", "copilot"], default="copilot")
    ev.add_argument("--train-dataset", required=True)
    ev.add_argument("--test-dataset", required=True)
    ev.add_argument("--ae", required=True)
    ev.add_argument("--threshold", default=None)
    ev.add_argument("--experiment", default=None, help="experiment descriptor JSON (overrides --role)")
    ev.add_argument("--epochs", type=int, default=None)
    ev.add_argument("--out", default="runs/reports/evaluate.json")
    ev.set_defaults(fn=cmd_evaluate)

    sw = sub.add_parser("sweep-gamma0", help="smoothness/unsafe-rate table over gamma0")
    sw.add_argument("--stack", default="runs/stack")
    sw.add_argument("--grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    sw.add_argument("--trials", type=int, default=20)
    sw.add_argument("--out", default="runs/reports/gamma0_sweep.json")
    sw.set_defaults(fn=cmd_sweep_gamma0)

    hb = sub.add_parser("handover-bench", help="closed-loop lapse benchmark")
    hb.add_argument("--stack", default="runs/stack")
    hb.add_argument("--trials", type=int, default=50)
    hb.add_argument("--out", default="runs/reports/handover_bench.json")
    hb.set_defaults(fn=cmd_handover_bench)

    sv = sub.add_parser("serve", help="run the live loop for cockpit clients")
    sv.add_argument("--stack", default="runs/stack")
    sv.add_argument("--port", type=int, default=8700)
    sv.add_argument("--track-seed", type=int, default=None)
    sv.add_argument("--lockstep", action="store_true", help="wait for the driver input each tick (replay mode)")
    sv.add_argument("--max-ticks", type=int, default=None)
    sv.add_argument("--log", default=None, help="write the run log (line-delimited JSON) here")
    sv.set_defaults(fn=cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {json.dumps({'type': type(e).__name__, 'detail': str(e)})}", file=sys.stderr)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
