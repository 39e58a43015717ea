"""Named, reproducible random substreams derived from one integer seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key, int(index))))
