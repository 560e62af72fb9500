"""Scratch: build the full trained stack and stash it in /tmp/stack for iteration."""

import pickle
import time
from pathlib import Path

import numpy as np

from diffsafe.config import RunConfig
from diffsafe.drivers.dataset import KIND_COPILOT, KIND_EVAL
from diffsafe.pipeline import (
    build_stack,
    calibrate,
    collect_dataset,
    encode_dataset_latents,
    make_tracks,
    train_policy,
    train_raster_autoencoder,
)

out = Path("/tmp/stack")
out.mkdir(exist_ok=True)
cfg = RunConfig()

t0 = time.time()
tracks = make_tracks(cfg)
ds_cop = collect_dataset(cfg, KIND_COPILOT, tracks)
ds_eval = collect_dataset(cfg, KIND_EVAL, tracks)
print(f"data: {time.time()-t0:.0f}s", flush=True)

t0 = time.time()
ae = train_raster_autoencoder(cfg, ds_cop)
encode_dataset_latents(ds_cop, ae)
encode_dataset_latents(ds_eval, ae)
print(f"ae: {time.time()-t0:.0f}s", flush=True)

t0 = time.time()
copilot, curve_c = train_policy(cfg, "copilot", ds_cop)
print(f"copilot: {time.time()-t0:.0f}s loss {curve_c[0]:.3f}->{curve_c[-1]:.3f}", flush=True)

t0 = time.time()
evaluator, curve_e = train_policy(cfg, "evaluator", ds_eval)
print(f"evaluator: {time.time()-t0:.0f}s loss {curve_e[0]:.3f}->{curve_e[-1]:.3f}", flush=True)

t0 = time.time()
tau = calibrate(cfg, copilot, ds_cop)
print(f"calibrate: {time.time()-t0:.0f}s tau={tau:.4f}", flush=True)

with open(out / "stack.pkl", "wb") as f:
    pickle.dump(
        {
            "cfg": cfg,
            "tracks": tracks,
            "ds_cop": ds_cop,
            "ds_eval": ds_eval,
            "ae": ae,
            "copilot": copilot,
            "evaluator": evaluator,
            "tau": tau,
            "curves": (curve_c, curve_e),
        },
        f,
    )
print("saved /tmp/stack/stack.pkl", flush=True)
