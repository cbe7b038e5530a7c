import logging
from typing import List, Sequence

import numpy as np

from ..core.config import get_settings
from ..core.constants import PredictionKind, TemperatureVariant
from ..core.errors import InvalidParameterError, ShapeMismatchError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet, log_probs
from ..scaling.temperature import TemperatureModel, scale, scale_array, scale_dynamic

logger = logging.getLogger(__name__)


class CombinationWeights:
    """Simplex weights over ensemble members"""

    def __init__(self, w: Sequence[float]):
        w = np.array(w, dtype=np.float64, copy=True).ravel()
        if w.size < 1:
            raise InvalidParameterError("weights need at least one member")
        if not np.isfinite(w).all() or (w < 0).any():
            raise InvalidParameterError(f"weights must be finite and nonnegative: {w.tolist()}")
        if abs(w.sum() - 1.0) > get_settings().ensemble.weight_tolerance:
            raise InvalidParameterError(f"weights sum to {w.sum():.12g}, expected 1")
        w.flags.writeable = False
        self.w = w

    @classmethod
    def uniform(cls, m: int) -> "CombinationWeights":
        return cls(np.full(m, 1.0 / m))

    @property
    def size(self) -> int:
        return self.w.size

    def to_list(self) -> List[float]:
        return [float(v) for v in self.w]

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"CombinationWeights({np.round(self.w, 6).tolist()})"


def resolve_weights(weights, m: int) -> np.ndarray:
    w = weights.w if isinstance(weights, CombinationWeights) else CombinationWeights(weights).w
    if w.size != m:
        raise ShapeMismatchError(f"{w.size} weights for {m} members")
    return w


def combine_arrays(members: Sequence[np.ndarray], w: np.ndarray) -> np.ndarray:
    """Weighted sum of member matrices, accumulated in member order"""
    combined = w[0] * members[0]
    for m in range(1, len(members)):
        combined = combined + w[m] * members[m]
    return combined


def combine(ens: EnsemblePredictions, weights) -> LabeledPredictionSet:
    """P(j | x; ensemble) = sum_m w_m P(j | x; member m)"""
    ens = ens.probabilities()
    w = resolve_weights(weights, ens.size)
    return LabeledPredictionSet(combine_arrays(ens.stack, w), ens.labels)


def calibrate_pre(ens: EnsemblePredictions, temps: TemperatureModel, weights) -> LabeledPredictionSet:
    """Scale each member's logits by its own temperature, then combine"""
    if ens.kind != PredictionKind.LOGITS:
        raise InvalidParameterError("pre-combination calibration needs logit members")
    if temps.variant == TemperatureVariant.GLOBAL:
        member_temps = temps.temps * ens.size
    elif temps.variant == TemperatureVariant.PER_MEMBER:
        member_temps = temps.temps
    else:
        raise InvalidParameterError("pre-combination calibration takes a global or per-member model")
    if len(member_temps) != ens.size:
        raise ShapeMismatchError(f"{len(member_temps)} temperatures for {ens.size} members")
    w = resolve_weights(weights, ens.size)
    scaled = [scale_array(member, t) for member, t in zip(ens.stack, member_temps)]
    return LabeledPredictionSet(combine_arrays(scaled, w), ens.labels)


def calibrate_post(ens: EnsemblePredictions, weights, model: TemperatureModel) -> LabeledPredictionSet:
    """Combine first, then temperature-scale the log of the combined probabilities"""
    if model.variant == TemperatureVariant.PER_MEMBER:
        raise InvalidParameterError("post-combination calibration takes a global or regional model")
    surrogate = log_probs(combine(ens, weights))
    if model.variant == TemperatureVariant.REGIONAL:
        return scale_dynamic(surrogate, model)
    return scale(surrogate, model.temperature)
