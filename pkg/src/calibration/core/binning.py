from typing import Optional, Tuple

import numpy as np

from .constants import BinningMode, DEFAULT_BIN_COUNT
from .errors import InvalidParameterError


class BinningScheme:
    """Partition of [0, 1] into probability regions.

    Fixed-width bin z (1-based) covers ((z-1)/B, z/B]; bin 1 also holds 0.
    Exact-value mode makes every distinct float its own region.
    """

    def __init__(self, bin_count: Optional[int] = DEFAULT_BIN_COUNT, mode: BinningMode = BinningMode.FIXED_WIDTH):
        mode = BinningMode(mode)
        if mode == BinningMode.FIXED_WIDTH:
            if bin_count is None or int(bin_count) != bin_count or bin_count < 1:
                raise InvalidParameterError(f"bin count must be a positive integer, got {bin_count}")
            bin_count = int(bin_count)
        else:
            bin_count = None
        self.bin_count = bin_count
        self.mode = mode

    @classmethod
    def fixed(cls, bin_count: int = DEFAULT_BIN_COUNT) -> "BinningScheme":
        return cls(bin_count, BinningMode.FIXED_WIDTH)

    @classmethod
    def exact(cls) -> "BinningScheme":
        return cls(None, BinningMode.EXACT_VALUE)

    @property
    def is_exact(self) -> bool:
        return self.mode == BinningMode.EXACT_VALUE

    @property
    def epsilon(self) -> float:
        return 0.0 if self.is_exact else 1.0 / (2 * self.bin_count)

    def edges(self) -> np.ndarray:
        return np.arange(self.bin_count + 1) / self.bin_count

    def centers(self) -> np.ndarray:
        z = np.arange(1, self.bin_count + 1)
        return np.minimum(1.0, (2 * z - 1) * self.epsilon)

    def interval(self, index: int) -> Tuple[float, float]:
        """(lower, upper] of the 0-based bin index"""
        return index / self.bin_count, (index + 1) / self.bin_count

    def assign(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map probabilities to 0-based region ids; returns (ids, region centers).

        In exact-value mode the ids index the sorted distinct values, which
        double as region centers.
        """
        values = np.asarray(values, dtype=np.float64)
        if self.is_exact:
            centers, ids = np.unique(values, return_inverse=True)
            return ids.reshape(values.shape), centers
        z = np.searchsorted(self.edges(), values, side="left")
        ids = np.clip(z, 1, self.bin_count) - 1
        return ids, self.centers()

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "bin_count": self.bin_count, "epsilon": self.epsilon}

    def __repr__(self) -> str:
        if self.is_exact:
            return "BinningScheme(exact-value)"
        return f"BinningScheme(B={self.bin_count})"
