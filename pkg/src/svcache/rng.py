"""Seedable counter-based random streams.

Every generator in the package is a Philox stream derived from a root seed
plus a path of labels, so distinct users / servers / stages get independent
substreams and any of them can be regenerated in isolation (e.g. when
generating users in parallel).
"""

from __future__ import annotations

import hashlib

import numpy as np


def _path_word(item: int | str) -> int:
    if isinstance(item, (int, np.integer)):
        return int(item) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(item).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Independent generator for (seed, *path), stable across processes."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_path_word(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *path: int | str) -> int:
    """Collapse (seed, *path) into a single 64-bit seed for APIs that take one."""
    material = b"".join(_path_word(p).to_bytes(8, "big") for p in (seed, *path))
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
