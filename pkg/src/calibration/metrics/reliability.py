from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..core.binning import BinningScheme
from ..core.predictions import LabeledPredictionSet
from .calibration_errors import top_outcomes

CURVE_COLUMNS = ["bin_center", "occupancy", "confidence", "accuracy", "count"]


@dataclass
class ReliabilityBin:
    center: float
    occupancy: float
    confidence: Optional[float]
    accuracy: Optional[float]
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0

    def to_dict(self) -> dict:
        return {
            "bin_center": self.center,
            "occupancy": self.occupancy,
            "confidence": self.confidence,
            "accuracy": self.accuracy,
            "count": self.count,
            "empty": self.empty,
        }


class ReliabilityCurve:
    """Top-label reliability data: per region center, occupancy, Conf, Acc and count"""

    def __init__(self, scheme: BinningScheme, bins: List[ReliabilityBin]):
        self.scheme = scheme
        self.bins = bins

    def occupied(self) -> List[ReliabilityBin]:
        return [b for b in self.bins if not b.empty]

    def expected_error(self) -> float:
        """Occupancy-weighted |Conf - Acc|"""
        return float(sum(b.occupancy * abs(b.confidence - b.accuracy) for b in self.occupied()))

    def rows(self, include_empty: bool = False) -> List[list]:
        bins = self.bins if include_empty else self.occupied()
        return [[b.center, b.occupancy, b.confidence, b.accuracy, b.count] for b in bins]

    def to_dict(self) -> dict:
        return {"binning": self.scheme.to_dict(), "bins": [b.to_dict() for b in self.bins]}

    def __repr__(self) -> str:
        return f"ReliabilityCurve({self.scheme!r}, occupied={len(self.occupied())})"


def reliability(
    preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None
) -> ReliabilityCurve:
    scheme = scheme if scheme is not None else BinningScheme.fixed()
    probs = preds.probs
    _, confidence, hit = top_outcomes(probs, preds.labels, targets)
    ids, centers = scheme.assign(confidence)
    n_regions = len(centers)
    counts = np.bincount(ids, minlength=n_regions)
    conf_sums = np.bincount(ids, weights=confidence, minlength=n_regions)
    hit_sums = np.bincount(ids, weights=hit, minlength=n_regions)

    n = probs.shape[0]
    bins = []
    for z in range(n_regions):
        count = int(counts[z])
        if count:
            bins.append(ReliabilityBin(float(centers[z]), count / n, conf_sums[z] / count, hit_sums[z] / count, count))
        else:
            bins.append(ReliabilityBin(float(centers[z]), 0.0, None, None, 0))
    return ReliabilityCurve(scheme, bins)
