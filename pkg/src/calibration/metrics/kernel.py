import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ..core.errors import InvalidParameterError
from ..core.parallel import ordered_map
from ..core.predictions import LabeledPredictionSet

logger = logging.getLogger(__name__)

BANDWIDTH_SAMPLE = 1000
MAX_ROWS = 10000
BLOCK_ROWS = 256


@dataclass
class SkceResult:
    value: float
    bandwidth: float
    rows_used: int
    subsampled: bool

    def to_dict(self) -> dict:
        return {
            "skce": self.value,
            "skce_bandwidth": self.bandwidth,
            "skce_rows": self.rows_used,
            "skce_subsampled": self.subsampled,
        }


def stride_subsample(n: int, limit: int) -> np.ndarray:
    """Exactly min(n, limit) evenly spread row indices, floor(i * n / limit)"""
    if n <= limit:
        return np.arange(n)
    return (np.arange(limit) * n) // limit


def median_bandwidth(probs: np.ndarray, sample: int = BANDWIDTH_SAMPLE) -> float:
    """Median pairwise L1 distance between prediction rows"""
    rows = probs[stride_subsample(probs.shape[0], sample)]
    median = float(np.median(pdist(rows, metric="cityblock")))
    if median <= 0.0:
        logger.warning("Median pairwise distance is 0; falling back to SKCE bandwidth 1.0")
        return 1.0
    return median


def _block_sum(probs: np.ndarray, labels: np.ndarray, bandwidth: float, start: int, stop: int) -> float:
    block = probs[start:stop]
    block_labels = labels[start:stop]
    kernel = np.exp(-cdist(block, probs, metric="cityblock") / bandwidth)
    agreement = (block_labels[:, np.newaxis] == labels[np.newaxis, :]).astype(np.float64)
    agreement -= block[:, labels]
    agreement -= probs[:, block_labels].T
    agreement += block @ probs.T
    upper = np.arange(probs.shape[0])[np.newaxis, :] > np.arange(start, stop)[:, np.newaxis]
    return float(np.sum(kernel * agreement, where=upper))


def skce_details(
    preds: LabeledPredictionSet,
    bandwidth: Union[float, str] = "auto",
    max_rows: Optional[int] = MAX_ROWS,
    bandwidth_sample: int = BANDWIDTH_SAMPLE,
    block_rows: int = BLOCK_ROWS,
) -> SkceResult:
    """Unbiased quadratic squared kernel calibration error.

    Laplacian kernel exp(-|p - q|_1 / nu) times the label term
    d(y_i, y_j) - p_i[y_j] - p_j[y_i] + <p_i, p_j>, averaged over pairs i < j.
    The value may be negative.
    """
    probs, labels = np.asarray(preds.probs), np.asarray(preds.labels)
    n = probs.shape[0]
    if n < 2:
        raise InvalidParameterError(f"SKCE needs at least 2 samples, got {n}")

    subsampled = max_rows is not None and n > max_rows
    if subsampled:
        rows = stride_subsample(n, max_rows)
        probs, labels = probs[rows], labels[rows]
        logger.warning(f"SKCE subsampled from {n} to {len(rows)} rows")
        n = len(rows)

    if bandwidth == "auto":
        nu = median_bandwidth(probs, bandwidth_sample)
    else:
        nu = float(bandwidth)
        if not nu > 0:
            raise InvalidParameterError(f"SKCE bandwidth must be positive, got {bandwidth}")

    starts = range(0, n, block_rows)
    partials = ordered_map(lambda s: _block_sum(probs, labels, nu, s, min(s + block_rows, n)), starts)
    total = 0.0
    for partial in partials:
        total += partial
    value = 2.0 * total / (n * (n - 1))
    return SkceResult(value=value, bandwidth=nu, rows_used=n, subsampled=subsampled)


def skce_uq(preds: LabeledPredictionSet, bandwidth: Union[float, str] = "auto", **kwargs) -> float:
    return skce_details(preds, bandwidth, **kwargs).value
