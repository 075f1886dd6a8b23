"""Deterministic random-stream derivation from a single root seed.

Every stochastic component draws from a substream addressed by a path of
labels (module name, sample id, iteration, ...).  Substreams are derived with
``numpy.random.SeedSequence`` spawn keys, a counter-based splitter, so results
do not depend on thread scheduling or on the order in which streams are
created.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"substream path parts must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"substream path parts must be int or str, got {type(part)!r}")


def substream(root_seed: int, *path) -> np.random.Generator:
    """Return an independent generator for (root_seed, path)."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
