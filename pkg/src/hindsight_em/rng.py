"""Hierarchical RNG streams: root seed -> named path -> generator.

Streams are derived with ``SeedSequence`` spawn keys, so a stream depends only
on its path and never on how many draws other streams have made.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def stream(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(_key(p) for p in path)))


def worker_streams(seed: int, workers: int, *path) -> list[np.random.Generator]:
    return [stream(seed, *path, "worker", w) for w in range(workers)]
