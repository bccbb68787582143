"""
Seeded random streams.

Every stochastic component takes an explicit seed and draws from its own
numpy Generator, so identical seeds reproduce identical populations,
arrival schedules and fuzz campaigns.
"""

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence


def make_generator(seed: int | None, *stream: int) -> Generator:
    """
    Build a generator for a seed and an optional stream path.

    Args:
        seed: Base seed (None draws fresh OS entropy)
        *stream: Integers naming an independent sub-stream of the seed

    Returns:
        numpy Generator
    """
    sequence = SeedSequence(seed, spawn_key=tuple(stream))
    return Generator(PCG64(sequence))


def harmonic_arrival_probabilities(rounds: int) -> np.ndarray:
    """
    Arrival law over steps 1..T with P(t) proportional to 1/t.

    Args:
        rounds: Number of global iterations T

    Returns:
        Array of length T summing to 1
    """
    weights = 1.0 / np.arange(1, rounds + 1, dtype=float)
    return weights / weights.sum()
