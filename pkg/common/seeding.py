"""
Seeding
Derives independent, reproducible random generators from a root seed
"""

import zlib

import numpy as np

SEED_BOUND = 2 ** 63


def derive_seed(seed, *keys):
    """
    Derive a child seed from a root seed and a sequence of keys

    Args:
        seed: Root integer seed
        keys: Strings, ints or floats identifying the consumer

    Returns:
        Integer seed in [0, 2**63)
    """
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, float):
            key = repr(round(key, 9))
        if isinstance(key, str):
            words.append(zlib.crc32(key.encode("utf-8")))
        else:
            words.append(int(key) & 0xFFFFFFFF)
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31 | int(state[1]) >> 1) % SEED_BOUND


def derive_rng(seed, *keys):
    """Generator seeded from derive_seed(seed, *keys)"""
    return np.random.default_rng(derive_seed(seed, *keys))


def next_seed(rng):
    """Draw a fresh child seed from a generator"""
    return int(rng.integers(0, SEED_BOUND))
