import json

import numpy as np
import pytest

from diffsafe.cli import main
from diffsafe.config import ConfigError, RunConfig, config_from_dict, load_config, save_config
from diffsafe.sim import load_track


def test_default_config_roundtrip(tmp_path):
    cfg = RunConfig()
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    loaded = load_config(path)
    assert loaded == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict({"nonsense": 1})
    with pytest.raises(ConfigError, match="sim"):
        config_from_dict({"sim": {"warp_drive": True}})


def test_config_nested_override():
    cfg = config_from_dict({"seed": 7, "sim": {"dt": 0.05}, "handover": {"gamma0": 0.3}})
    assert cfg.seed == 7
    assert cfg.sim.dt == 0.05
    assert cfg.handover.gamma0 == 0.3
    assert cfg.sim.wheelbase == RunConfig().sim.wheelbase  # untouched defaults survive


def test_config_validates_values():
    with pytest.raises(ConfigError):
        config_from_dict({"sim": {"dt": -1.0}})


def test_gen_tracks_deterministic_and_idempotent(tmp_path, monkeypatch):
    out = tmp_path / "tracks"
    assert main(["--seed", "1", "gen-tracks", "--count", "3", "--out", str(out)]) == 0
    first = [(out / f"track_{i:03d}.json").read_bytes() for i in range(3)]
    assert main(["--seed", "1", "gen-tracks", "--count", "3", "--out", str(out)]) == 0
    second = [(out / f"track_{i:03d}.json").read_bytes() for i in range(3)]
    assert first == second
    t = load_track(out / "track_000.json")
    assert t.seed == 1000


def test_seed_env_fallback(tmp_path, monkeypatch):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    monkeypatch.setenv("DIFFSAFE_SEED", "3")
    assert main(["gen-tracks", "--count", "1", "--out", str(out1)]) == 0
    monkeypatch.delenv("DIFFSAFE_SEED")
    assert main(["--seed", "3", "gen-tracks", "--count", "1", "--out", str(out2)]) == 0
    assert (out1 / "track_000.json").read_bytes() == (out2 / "track_000.json").read_bytes()


def test_cli_error_reporting_machine_parsable(tmp_path, capsys):
    rc = main(["--config", str(tmp_path / "missing.json"), "gen-tracks", "--out", str(tmp_path / "t")])
    assert rc == 1
    err = capsys.readouterr().err
    first_line = err.splitlines()[0]
    assert first_line.startswith("error: ")
    payload = json.loads(first_line[len("error: ") :])
    assert payload["type"] == "ConfigError"


def test_unknown_flag_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["gen-tracks", "--definitely-not-a-flag"])
    assert exc.value.code == 2
