"""Seed handling shared by the Monte Carlo harnesses.

Rounds are grouped in consecutive blocks of BLOCK_SIZE. Block b draws every
random number it needs from ``numpy.random.default_rng([seed, b])``, so a block
can be evaluated on any worker and in any order with identical results.
"""

import os
from collections.abc import Iterator

import numpy as np

BLOCK_SIZE = int(os.getenv("TIMEBIN_MC_BLOCK_SIZE", "65536"))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([seed, block])


def iter_blocks(rounds: int, seed: int) -> Iterator[tuple[int, np.random.Generator]]:
    """Yield (block length, generator) covering ``rounds`` rounds."""
    for block, start in enumerate(range(0, rounds, BLOCK_SIZE)):
        yield min(BLOCK_SIZE, rounds - start), block_rng(seed, block)


def fresh_seed() -> int:
    """Draw a seed from OS entropy, for commands run without --seed."""
    return int(np.random.SeedSequence().entropy % (2**63))
