"""Seed handling.

Randomness is drawn in fixed-size blocks, each with its own stream derived
from the master seed and the block index.  Results therefore depend on the
seed only, never on how many threads consumed the blocks.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 1 << 16


def as_seed_sequence(rng):
    """Normalise an int, ``SeedSequence`` or ``Generator`` to a ``SeedSequence``."""
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    if rng is None:
        raise ValueError("a seed is required; pass an int, SeedSequence or Generator")
    if isinstance(rng, (list, tuple, np.ndarray)):
        return np.random.SeedSequence([int(v) for v in rng])
    return np.random.SeedSequence(int(rng))


def child(seq, *key):
    """Deterministic sub-stream of ``seq`` addressed by ``key``."""
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + tuple(key))


def generator(seq, *key):
    return np.random.Generator(np.random.PCG64(child(seq, *key)))


def block_uniform(rng, n, width=1, *, stream=0, threads=1):
    """``(n, width)`` uniforms on [0, 1), identical for any ``threads``."""
    seq = as_seed_sequence(rng)
    out = np.empty((n, width))
    starts = range(0, n, BLOCK)

    def fill(start):
        stop = min(start + BLOCK, n)
        out[start:stop] = generator(seq, stream, start // BLOCK).random((stop - start, width))

    if threads > 1 and n > BLOCK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return out
