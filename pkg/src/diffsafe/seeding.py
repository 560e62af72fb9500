"""Stable seed derivation for named substreams."""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")


def seed_seq(*parts) -> np.random.SeedSequence:
    """SeedSequence from a mix of ints and strings, stable across runs and platforms."""
    return np.random.SeedSequence([_as_entropy(p) for p in parts])


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(seed_seq(*parts))
