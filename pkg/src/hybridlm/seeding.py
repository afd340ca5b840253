"""Keyed RNG streams for reproducible simulation.

Every random decision draws from a generator keyed by (run seed, round
index, stream id), so outcomes are independent of evaluation order: sweeps
can parallelize across runs, and consuming one stream never perturbs
another. Stream ids name the decision they feed.
"""

from __future__ import annotations

import hashlib

import numpy as np

DRAFT = 0
UNCERTAINTY = 1
SKIP = 2
CHANNEL = 3
VERIFY = 4
COUNTERFACTUAL = 5

# Oracle substreams are keyed by context fingerprint instead of round index.
ORACLE_PERM = 10
ORACLE_NOISE_SLM = 11
ORACLE_NOISE_LLM = 12


def round_rng(seed: int, round_idx: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, round_idx, stream)))


def context_rng(seed: int, fingerprint: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, fingerprint, stream)))


def sequence_fingerprint(tokens: list[int]) -> int:
    """Stable 64-bit hash of a token sequence, identical across processes."""
    h = hashlib.blake2b(digest_size=8)
    for t in tokens:
        h.update(int(t).to_bytes(4, "little", signed=False))
    return int.from_bytes(h.digest(), "little")
