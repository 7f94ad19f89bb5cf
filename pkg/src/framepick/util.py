"""Hashing and seed-derivation helpers.

All randomness in the package flows through numpy Generators seeded from
explicit integer tuples, so every (reset, step*, observe*) sequence and
every training run is reproducible from its configuration alone.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

MAX_SEED = 2**63  # seeds are stored as non-negative 63-bit ints (JSON-safe)


def canonical_json(obj) -> str:
    """Serialize with sorted keys and no whitespace variation."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def stable_hash64(obj) -> int:
    """64-bit content hash of any JSON-serializable object, < 2**63."""
    digest = hashlib.blake2b(canonical_json(obj).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % MAX_SEED


def hash_bytes64(data: bytes) -> str:
    """Hex 64-bit content hash of raw bytes (used for suite files)."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for substream `stream` of the given seed."""
    return np.random.default_rng(np.random.SeedSequence((seed, *stream)))


def derive_seed(seed: int, *stream: int) -> int:
    """Derived 63-bit seed, stable across runs."""
    return stable_hash64([seed, *stream])
