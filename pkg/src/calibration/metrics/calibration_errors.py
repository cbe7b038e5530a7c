"""Binned calibration errors and global calibration gaps.

Every metric compares predictions against a target matrix: the one-hot
encoding of the labels, or, when `targets` is given, an N x K matrix of
true posteriors (distribution-level evaluation on synthetic data).
"""
import logging
from typing import Optional, Tuple

import numpy as np

from ..core.binning import BinningScheme
from ..core.constants import PROBABILITY_FLOOR
from ..core.errors import ShapeMismatchError
from ..core.predictions import LabeledPredictionSet
from .regions import regions_from_array, top_predictions

logger = logging.getLogger(__name__)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    encoded = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    encoded[np.arange(labels.shape[0]), labels] = 1.0
    return encoded


def target_matrix(probs: np.ndarray, labels: np.ndarray, targets: Optional[np.ndarray] = None) -> np.ndarray:
    if targets is None:
        return one_hot(labels, probs.shape[1])
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != probs.shape:
        raise ShapeMismatchError(f"targets shape {targets.shape} does not match predictions {probs.shape}")
    return targets


def _scheme(scheme: Optional[BinningScheme]) -> BinningScheme:
    return scheme if scheme is not None else BinningScheme.fixed()


def top_outcomes(probs, labels, targets) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(top class, max probability, target mass on the top class) per sample"""
    top_class, confidence = top_predictions(probs)
    rows = np.arange(probs.shape[0])
    if targets is None:
        hit = (labels == top_class).astype(np.float64)
    else:
        hit = target_matrix(probs, labels, targets)[rows, top_class]
    return top_class, confidence, hit


# --- array level (used by the fitting loops) -----------------------------

def all_label_sums(probs, labels, scheme, targets=None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-region residual sums (R,) and per-(region, class) sums (R, K)"""
    index = regions_from_array(probs, scheme, top_label=False)
    residual = probs - target_matrix(probs, labels, targets)
    k = probs.shape[1]
    cell = np.bincount(index.cell_ids().ravel(), weights=residual.ravel(), minlength=index.n_regions * k)
    cell = cell.reshape(index.n_regions, k)
    region = np.bincount(index.ids.ravel(), weights=residual.ravel(), minlength=index.n_regions)
    return region, cell


def top_label_sums(probs, labels, scheme, targets=None) -> Tuple[np.ndarray, np.ndarray]:
    """Top-label analogue of `all_label_sums`"""
    top_class, confidence, hit = top_outcomes(probs, labels, targets)
    residual = confidence - hit
    ids, centers = scheme.assign(confidence)
    k = probs.shape[1]
    n_regions = len(centers)
    region = np.bincount(ids, weights=residual, minlength=n_regions)
    cell = np.bincount(ids * k + top_class, weights=residual, minlength=n_regions * k).reshape(n_regions, k)
    return region, cell


def ece_array(probs: np.ndarray, labels: np.ndarray, scheme: BinningScheme, targets=None) -> float:
    region, _ = top_label_sums(probs, labels, scheme, targets)
    return float(np.abs(region).sum() / probs.shape[0])


# --- public metrics ------------------------------------------------------

def ace(preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None) -> float:
    """All-label calibration error; the absolute value sits outside the class sum"""
    probs = preds.probs
    region, _ = all_label_sums(probs, preds.labels, _scheme(scheme), targets)
    return float(np.abs(region).sum() / probs.size)


def acce(preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None) -> float:
    probs = preds.probs
    _, cell = all_label_sums(probs, preds.labels, _scheme(scheme), targets)
    return float(np.abs(cell).sum() / probs.size)


def ece(preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None) -> float:
    """Top-label calibration error over the max-probability regions"""
    return ece_array(preds.probs, preds.labels, _scheme(scheme), targets)


def ecce(preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None) -> float:
    probs = preds.probs
    _, cell = top_label_sums(probs, preds.labels, _scheme(scheme), targets)
    return float(np.abs(cell).sum() / probs.shape[0])


def ece_direct(preds: LabeledPredictionSet, scheme: Optional[BinningScheme] = None, targets=None) -> float:
    """ECE summed cell by cell over the explicit region index"""
    scheme = _scheme(scheme)
    probs = preds.probs
    target = target_matrix(probs, preds.labels, targets)
    index = regions_from_array(probs, scheme, top_label=True)
    per_region = np.zeros(index.n_regions)
    for (j, z), samples in sorted(index.cells().items(), key=lambda item: (item[0][1], item[0][0])):
        per_region[z] += np.sum(probs[samples, j] - target[samples, j])
    return float(np.abs(per_region).sum() / probs.shape[0])


def global_gaps(preds: LabeledPredictionSet, targets=None) -> Tuple[np.ndarray, float]:
    """(all-label gap per class, top-label gap); both signed"""
    probs = preds.probs
    target = target_matrix(probs, preds.labels, targets)
    all_label = probs.mean(axis=0) - target.mean(axis=0)
    _, confidence, hit = top_outcomes(probs, preds.labels, targets)
    top_label = float(confidence.mean() - hit.mean())
    return all_label, top_label


def accuracy(preds: LabeledPredictionSet, targets=None) -> float:
    _, _, hit = top_outcomes(preds.probs, preds.labels, targets)
    return float(hit.mean())


def nll(preds: LabeledPredictionSet, floor: float = PROBABILITY_FLOOR, targets=None) -> float:
    """Mean negative log-likelihood in nats; cross-entropy against soft targets"""
    probs = preds.probs
    if targets is None:
        true_probs = probs[np.arange(probs.shape[0]), preds.labels]
        return float(-np.mean(np.log(np.maximum(true_probs, floor))))
    target = target_matrix(probs, preds.labels, targets)
    return float(-np.mean(np.sum(target * np.log(np.maximum(probs, floor)), axis=1)))
