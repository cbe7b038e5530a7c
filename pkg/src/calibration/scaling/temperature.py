import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from ..core.constants import TemperatureVariant
from ..core.errors import InvalidParameterError
from ..core.predictions import LabeledPredictionSet, LogitSet, softmax_rows

logger = logging.getLogger(__name__)


def _check_temperature(t: float) -> float:
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise InvalidParameterError(f"temperature must be a positive finite number, got {t}")
    return t


class TemperatureModel:
    """A fitted temperature calibrator.

    Regional models cut [0, 1] at ascending boundaries into left-closed
    regions [b_r, b_{r+1}); the last region is closed at 1.
    """

    def __init__(self, variant: TemperatureVariant, temps: Sequence[float], boundaries: Optional[Sequence[float]] = None):
        self.variant = TemperatureVariant(variant)
        self.temps: List[float] = [_check_temperature(t) for t in temps]
        self.boundaries: List[float] = [float(b) for b in (boundaries or [])]

        if not self.temps:
            raise InvalidParameterError("a temperature model needs at least one temperature")
        if self.variant == TemperatureVariant.GLOBAL and len(self.temps) != 1:
            raise InvalidParameterError(f"global model takes one temperature, got {len(self.temps)}")
        if self.variant != TemperatureVariant.REGIONAL and self.boundaries:
            raise InvalidParameterError(f"{self.variant.value} model takes no boundaries")
        if self.variant == TemperatureVariant.REGIONAL:
            cuts = np.asarray(self.boundaries)
            if np.any(cuts <= 0) or np.any(cuts >= 1) or np.any(np.diff(cuts) <= 0):
                raise InvalidParameterError(f"boundaries must be strictly ascending inside (0, 1): {self.boundaries}")
            if len(self.temps) != len(self.boundaries) + 1:
                raise InvalidParameterError(
                    f"{len(self.boundaries)} boundaries need {len(self.boundaries) + 1} temperatures, got {len(self.temps)}"
                )

    @classmethod
    def global_model(cls, t: float) -> "TemperatureModel":
        return cls(TemperatureVariant.GLOBAL, [t])

    @classmethod
    def per_member(cls, temps: Sequence[float]) -> "TemperatureModel":
        return cls(TemperatureVariant.PER_MEMBER, temps)

    @classmethod
    def regional(cls, boundaries: Sequence[float], temps: Sequence[float]) -> "TemperatureModel":
        return cls(TemperatureVariant.REGIONAL, temps, boundaries)

    @property
    def temperature(self) -> float:
        if self.variant != TemperatureVariant.GLOBAL:
            raise InvalidParameterError(f"{self.variant.value} model has no single temperature")
        return self.temps[0]

    @property
    def region_count(self) -> int:
        return len(self.temps) if self.variant == TemperatureVariant.REGIONAL else 1

    def region_of(self, confidence: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.boundaries), confidence, side="right")

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "temps": list(self.temps), "boundaries": list(self.boundaries)}

    @classmethod
    def from_dict(cls, payload: dict) -> "TemperatureModel":
        try:
            return cls(payload["variant"], payload["temps"], payload.get("boundaries") or [])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidParameterError):
                raise
            raise InvalidParameterError(f"malformed temperature model: {e}")

    def __eq__(self, other) -> bool:
        return isinstance(other, TemperatureModel) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"TemperatureModel({self.variant.value}, temps={self.temps}, boundaries={self.boundaries})"


def scale_array(logits: np.ndarray, t: float) -> np.ndarray:
    return softmax_rows(logits / _check_temperature(t))


def scale(logits: LogitSet, t: float) -> LabeledPredictionSet:
    """softmax(z / t); argmax is unchanged for every t > 0"""
    return LabeledPredictionSet(scale_array(logits.logits, t), logits.labels)


def dynamic_regions(logits: np.ndarray, model: TemperatureModel) -> np.ndarray:
    """Region of each row, decided on the temperature-1 max probability"""
    return model.region_of(softmax_rows(logits).max(axis=1))


def scale_dynamic_array(logits: np.ndarray, model: TemperatureModel) -> np.ndarray:
    if model.variant != TemperatureVariant.REGIONAL:
        raise InvalidParameterError(f"dynamic scaling needs a regional model, got {model.variant.value}")
    row_temps = np.asarray(model.temps)[dynamic_regions(logits, model)]
    return softmax_rows(logits / row_temps[:, np.newaxis])


def scale_dynamic(logits: LogitSet, model: TemperatureModel) -> LabeledPredictionSet:
    """Rescale each row with its region's temperature; membership is never recomputed after scaling"""
    return LabeledPredictionSet(scale_dynamic_array(logits.logits, model), logits.labels)
