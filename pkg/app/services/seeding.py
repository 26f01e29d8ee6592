import zlib
from typing import Union

import numpy as np

SeedPart = Union[int, str]


def _key(part: SeedPart) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"seed path components must be non-negative, got {part}")
    return int(part)


def derive_seed(master: int, *path: SeedPart) -> int:
    """Child seed for a named stream (``derive_seed(11, "fold", 3)``).

    Distinct paths give statistically independent streams; the same
    (master, path) always gives the same seed.
    """
    sequence = np.random.SeedSequence(master, spawn_key=tuple(_key(p) for p in path))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def rng_for(master: int, *path: SeedPart) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))
