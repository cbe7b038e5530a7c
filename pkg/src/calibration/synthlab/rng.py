"""Seeded random streams for the synthetic generators.

Each purpose draws from its own counter-based Philox generator, keyed by a
child of the run's SeedSequence, so streams are decorrelated and members can
be generated in any order.
"""
import numpy as np

from ..core.errors import InvalidParameterError

TRUTH_STREAM = 0
LABEL_STREAM = 1
MEMBER_STREAM_OFFSET = 2


class SeedStreams:
    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2**64:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)

    def stream(self, index: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(index,))
        return np.random.Generator(np.random.Philox(sequence))

    def truth(self) -> np.random.Generator:
        return self.stream(TRUTH_STREAM)

    def labels(self) -> np.random.Generator:
        return self.stream(LABEL_STREAM)

    def member(self, m: int) -> np.random.Generator:
        return self.stream(MEMBER_STREAM_OFFSET + m)

    def __repr__(self) -> str:
        return f"SeedStreams(seed={self.seed})"
