from __future__ import annotations

import hashlib

import numpy as np


def _word(part: int | str) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    if part < 0:
        raise ValueError("seed parts must be >= 0")
    return int(part)


def derive_seed(base: int, *parts: int | str) -> int:
    """Child seed for one (phase, epoch, batch, ...) coordinate; all randomness flows from ``base``."""

    ss = np.random.SeedSequence([_word(base), *(_word(p) for p in parts)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(base: int, *parts: int | str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *parts))
