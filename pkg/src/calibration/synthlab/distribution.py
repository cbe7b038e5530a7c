"""Distribution-level calibration errors on finite-region models.

A model is a list of input regions, each with a probability mass, a true
posterior and a predicted posterior. Calibration regions are the unions of
model regions sharing one exact predicted probability.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..core.errors import InvalidParameterError

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-12
ROW_TOLERANCE = 1e-12


class PiecewiseDistributionModel:
    def __init__(self, masses, true_posteriors, predicted_posteriors):
        masses = np.asarray(masses, dtype=np.float64)
        true_posteriors = np.asarray(true_posteriors, dtype=np.float64)
        predicted_posteriors = np.asarray(predicted_posteriors, dtype=np.float64)

        if masses.ndim != 1 or true_posteriors.shape != predicted_posteriors.shape:
            raise InvalidParameterError("masses must be a vector and posterior matrices must share a shape")
        if true_posteriors.ndim != 2 or true_posteriors.shape[0] != masses.size or true_posteriors.shape[1] < 2:
            raise InvalidParameterError(f"need one posterior row per region, got {true_posteriors.shape}")
        if (masses < 0).any() or abs(masses.sum() - 1.0) > MASS_TOLERANCE:
            raise InvalidParameterError(f"region masses must be nonnegative and sum to 1, got {masses.sum():.15g}")
        for name, matrix in (("true", true_posteriors), ("predicted", predicted_posteriors)):
            if (matrix < 0).any() or (matrix > 1).any() or (np.abs(matrix.sum(axis=1) - 1.0) > ROW_TOLERANCE).any():
                raise InvalidParameterError(f"{name} posterior rows must lie on the simplex")

        self.masses = masses
        self.true_posteriors = true_posteriors
        self.predicted_posteriors = predicted_posteriors

    @property
    def n_regions(self) -> int:
        return self.masses.size

    @property
    def n_classes(self) -> int:
        return self.true_posteriors.shape[1]

    def __repr__(self) -> str:
        return f"PiecewiseDistributionModel(regions={self.n_regions}, K={self.n_classes})"


@dataclass
class DistributionErrors:
    ace: float
    acce: float
    ece: float
    ecce: float

    def to_dict(self) -> dict:
        return {"ace": self.ace, "acce": self.acce, "ece": self.ece, "ecce": self.ecce}


def region_gaps(model: PiecewiseDistributionModel, top_label: bool = False) -> Dict[Tuple[float, int], float]:
    """(predicted value p, 0-based class j) -> mass-weighted gap sum_r pi_r (P_hat_rj - P_rj).

    Top-label gaps only count each region's argmax class (lowest index on ties).
    """
    gaps: Dict[Tuple[float, int], float] = {}
    predicted, truth = model.predicted_posteriors, model.true_posteriors
    for r in range(model.n_regions):
        classes = [int(np.argmax(predicted[r]))] if top_label else range(model.n_classes)
        for j in classes:
            key = (float(predicted[r, j]), j)
            gaps[key] = gaps.get(key, 0.0) + model.masses[r] * (predicted[r, j] - truth[r, j])
    return gaps


def _aggregate(gaps: Dict[Tuple[float, int], float]) -> Tuple[float, float]:
    """(sum_p |sum_j gap|, sum_p sum_j |gap|)"""
    outer, inner = 0.0, 0.0
    ordered = sorted(gaps.items())
    for _, group in itertools.groupby(ordered, key=lambda item: item[0][0]):
        values = [gap for _, gap in group]
        outer += abs(sum(values))
        inner += sum(abs(v) for v in values)
    return outer, inner


def dist_calibration_errors(model: PiecewiseDistributionModel) -> DistributionErrors:
    """Exact ACE, ACCE, ECE and ECCE of a finite-region model"""
    ace, acce = _aggregate(region_gaps(model, top_label=False))
    ece, ecce = _aggregate(region_gaps(model, top_label=True))
    k = model.n_classes
    return DistributionErrors(ace=ace / k, acce=acce / k, ece=ece, ecce=ecce)


def example1_model(tau: float) -> PiecewiseDistributionModel:
    """Three equal-mass regions, four classes: all-label calibrated, top-label miscalibrated for tau > 0"""
    if not 0.0 <= tau <= 0.05:
        raise InvalidParameterError(f"tau must lie in [0, 0.05], got {tau}")
    predicted = [
        [0.5, 0.4, 0.05, 0.05],
        [0.3, 0.4, 0.2, 0.1],
        [0.3, 0.3, 0.35, 0.05],
    ]
    truth = [
        [0.5, 0.4 - tau, 0.05, 0.05 + tau],
        [0.3 - tau, 0.4 + tau, 0.2, 0.1],
        [0.3 + tau, 0.3, 0.35, 0.05 - tau],
    ]
    return PiecewiseDistributionModel([1 / 3, 1 / 3, 1 / 3], truth, predicted)


def example3_population_model(n_classes: int = 4) -> PiecewiseDistributionModel:
    """Population limit of pairwise one-hot binning with uniform labels.

    A pair of same-class samples predicts a one-hot row (mass 1/K^2 per
    class); a mixed pair predicts 0.5 on both classes (mass 2/K^2 per pair).
    The true posterior is uniform everywhere.
    """
    k = n_classes
    masses, predicted = [], []
    for j in range(k):
        row = np.zeros(k)
        row[j] = 1.0
        masses.append(1.0 / k**2)
        predicted.append(row)
    for a, b in itertools.combinations(range(k), 2):
        row = np.zeros(k)
        row[[a, b]] = 0.5
        masses.append(2.0 / k**2)
        predicted.append(row)
    truth = np.full((len(masses), k), 1.0 / k)
    return PiecewiseDistributionModel(masses, truth, predicted)
