"""Seed derivation.

Every stochastic call in the package takes an explicit integer seed. Seeds for
sub-streams (per episode, per step, per purpose) are derived with the
splitmix64 finalizer, so runs are reproducible bit-for-bit across platforms.

    splitmix64(z):
        z = (z + 0x9E3779B97F4A7C15) mod 2**64
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
        return z ^ (z >> 31)

    episode_seed(master, i) = splitmix64((splitmix64(master) + i) mod 2**64)

Mixing the master first keeps neighbouring masters (0, 1, 2, ...) from
sharing shifted copies of one episode stream.

    derive_seed(seed, a, b, ...) = fold of splitmix64(acc ^ splitmix64(tag))
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# Stream tags used by the loops; fixed so that different loops drawing the same
# stream for the same (episode, step) see the same numbers.
ENV = 1
MEASURE = 2
POLICY = 3
SENSE = 4
CANDIDATES = 5
FINAL = 6
INIT = 7


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def episode_seed(master_seed: int, episode: int) -> int:
    return splitmix64((splitmix64(master_seed & MASK64) + episode) & MASK64)


def derive_seed(seed: int, *tags: int) -> int:
    acc = seed & MASK64
    for tag in tags:
        acc = splitmix64(acc ^ splitmix64(tag & MASK64))
    return acc


def uniform(seed: int) -> float:
    """Deterministic float in [0, 1) from the top 53 bits of a mixed seed."""
    return (splitmix64(seed & MASK64) >> 11) * (1.0 / (1 << 53))


def generator(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & MASK64)
