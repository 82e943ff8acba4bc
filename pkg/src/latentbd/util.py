"""Seed derivation and content hashing shared across the package."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def _tag_to_int(tag: Any) -> int:
    digest = hashlib.blake2b(str(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *tags: Any) -> np.random.Generator:
    """Independent, reproducible stream for (seed, tags).

    Streams with distinct tag tuples never collide, which lets dataset
    construction, poisoning and evaluation each own a namespace under one
    experiment seed.
    """
    spawn = tuple(_tag_to_int(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn))


def derive_int_seed(seed: int, *tags: Any) -> int:
    """A 63-bit integer seed derived like :func:`derive_rng` (for torch generators)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(_tag_to_int(t) for t in tags))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def stable_hash(obj: Any) -> str:
    """sha256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
