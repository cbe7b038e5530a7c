from typing import Dict, Optional, Tuple

import numpy as np

from ..core.binning import BinningScheme
from ..core.predictions import LabeledPredictionSet


class RegionIndex:
    """Sample-based calibration regions.

    All-label: `ids[i, j]` is the region of P(j | x_i), so every (sample,
    class) pair sits in exactly one region. Top-label: each sample sits in
    the cell (argmax class, region of its max probability); argmax ties go
    to the lowest class index.
    """

    def __init__(
        self,
        scheme: BinningScheme,
        top_label: bool,
        ids: np.ndarray,
        centers: np.ndarray,
        n_classes: int,
        top_class: Optional[np.ndarray] = None,
    ):
        self.scheme = scheme
        self.top_label = top_label
        self.ids = ids
        self.centers = centers
        self.n_classes = n_classes
        self.top_class = top_class

    @property
    def n_regions(self) -> int:
        return len(self.centers)

    def cell_ids(self) -> np.ndarray:
        """Flat (region, class) cell id, region-major"""
        if self.top_label:
            return self.ids * self.n_classes + self.top_class
        return self.ids * self.n_classes + np.arange(self.n_classes)[np.newaxis, :]

    def cells(self) -> Dict[Tuple[int, int], np.ndarray]:
        """(class, region) -> sorted sample indices of the occupied cells"""
        result: Dict[Tuple[int, int], np.ndarray] = {}
        if self.top_label:
            pairs = zip(self.top_class, self.ids)
            samples = np.arange(len(self.ids))
            for (j, z), i in zip(pairs, samples):
                result.setdefault((int(j), int(z)), []).append(int(i))
        else:
            n = self.ids.shape[0]
            for j in range(self.n_classes):
                for i in range(n):
                    result.setdefault((j, int(self.ids[i, j])), []).append(i)
        return {key: np.array(value, dtype=np.int64) for key, value in result.items()}

    def __repr__(self) -> str:
        label = "top-label" if self.top_label else "all-label"
        return f"RegionIndex({label}, {self.scheme!r}, regions={self.n_regions})"


def top_predictions(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(argmax class with lowest-index tie-break, max probability)"""
    top_class = np.argmax(probs, axis=1)
    return top_class, probs[np.arange(probs.shape[0]), top_class]


def regions_from_array(probs: np.ndarray, scheme: BinningScheme, top_label: bool) -> RegionIndex:
    n_classes = probs.shape[1]
    if top_label:
        top_class, confidence = top_predictions(probs)
        ids, centers = scheme.assign(confidence)
        return RegionIndex(scheme, True, ids, centers, n_classes, top_class)
    ids, centers = scheme.assign(probs)
    return RegionIndex(scheme, False, ids, centers, n_classes)


def assign_regions(preds: LabeledPredictionSet, scheme: BinningScheme, top_label: bool = False) -> RegionIndex:
    return regions_from_array(preds.probs, scheme, top_label)
