"""Named, independently seedable random streams derived from one root seed."""

from __future__ import annotations

import hashlib
import json
import zlib

import numpy as np

STREAM_NAMES = ("init", "pairing", "crossover", "mutation", "noise")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Generator for ``seed`` refined by an arbitrary key path.

    String keys are hashed with CRC-32 so the mapping is stable across runs and
    interpreters (``hash()`` is salted).
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy += [stream_key(k) if isinstance(k, str) else int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def make_streams(seed: int, names=STREAM_NAMES) -> dict[str, np.random.Generator]:
    return {name: make_rng(seed, name) for name in names}


def state_digest(*generators: np.random.Generator) -> str:
    """Short SHA-256 digest of the bit-generator states."""
    payload = json.dumps([g.bit_generator.state for g in generators], sort_keys=True, default=int)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
