"""Seeded randomness. Equal seeds give equal draw sequences on every platform (PCG64)."""

from dataclasses import dataclass

import numpy as np

# Named streams so parameter init, shuffling and data generation never share draws
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_DATA = 3
STREAM_BASELINE = 4
STREAM_GRADCHECK = 5


@dataclass(frozen=True)
class RngState:
    """A 64-bit run seed from which every named stream is derived."""

    seed: int

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def stream(self, *key: int) -> np.random.Generator:
        """Independent generator for a fixed key."""
        return np.random.default_rng([self.seed, *key])
