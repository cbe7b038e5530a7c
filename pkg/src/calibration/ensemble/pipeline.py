import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from ..core.binning import BinningScheme
from ..core.config import get_settings
from ..core.constants import CalibrationMode, PredictionKind, TemperatureVariant, WeightSource
from ..core.errors import InvalidParameterError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet
from ..metrics.report import MetricReport, evaluate
from ..scaling.fitting import FitConfig, fit_per_member, fit_post
from ..scaling.temperature import TemperatureModel
from .combination import CombinationWeights, calibrate_post, calibrate_pre, combine
from .weights import fit_weights_auc, fit_weights_max_ll

logger = logging.getLogger(__name__)


@dataclass
class CombineOutcome:
    weights: CombinationWeights
    combined: LabeledPredictionSet
    model: Optional[TemperatureModel]
    before: MetricReport
    after: MetricReport

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.to_list(),
            "temperature_model": self.model.to_dict() if self.model else None,
            "metrics_before": self.before.model_dump(),
            "metrics_after": self.after.model_dump(),
        }


def resolve_weight_source(
    ens: EnsemblePredictions,
    source: WeightSource,
    explicit: Optional[Sequence[float]] = None,
    model: Optional[TemperatureModel] = None,
) -> CombinationWeights:
    source = WeightSource(source)
    if source == WeightSource.UNIFORM:
        return CombinationWeights.uniform(ens.size)
    if source == WeightSource.MAX_LL:
        return fit_weights_max_ll(ens).weights
    if source == WeightSource.AUC:
        return fit_weights_auc(ens, model)
    if explicit is None:
        raise InvalidParameterError("weight source 'file' needs explicit weights")
    return CombinationWeights(explicit)


def run_combine(
    ens: EnsemblePredictions,
    source: WeightSource = WeightSource.UNIFORM,
    mode: CalibrationMode = CalibrationMode.NONE,
    model: Optional[TemperatureModel] = None,
    explicit_weights: Optional[Sequence[float]] = None,
    regions: Optional[int] = None,
    scheme: Optional[BinningScheme] = None,
    config: Optional[FitConfig] = None,
) -> CombineOutcome:
    """Weights, optional calibration, and before/after metrics for one ensemble.

    Without a supplied model the calibrator is fitted on the same data.
    """
    mode = CalibrationMode(mode)
    config = config or FitConfig.from_settings()

    if mode == CalibrationMode.PRE:
        if ens.kind != PredictionKind.LOGITS:
            raise InvalidParameterError("--calibrate pre needs logit members")
        if model is None:
            model = fit_per_member(ens, config).model
    auc_model = model if mode == CalibrationMode.PRE else None
    weights = resolve_weight_source(ens, source, explicit_weights, auc_model)

    raw = combine(ens, weights)
    if mode == CalibrationMode.NONE:
        combined = raw
    elif mode == CalibrationMode.PRE:
        combined = calibrate_pre(ens, model, weights)
    else:
        if model is None:
            region_count = None
            if mode == CalibrationMode.DYNAMIC:
                region_count = regions or get_settings().fit.regions
            model = fit_post(ens, weights, config, regions=region_count).model
        expected = TemperatureVariant.REGIONAL if mode == CalibrationMode.DYNAMIC else TemperatureVariant.GLOBAL
        if model.variant != expected:
            raise InvalidParameterError(f"--calibrate {mode.value} needs a {expected.value} temperature model")
        combined = calibrate_post(ens, weights, model)

    outcome = CombineOutcome(weights, combined, model, evaluate(raw, scheme), evaluate(combined, scheme))
    logger.info(f"Combined {ens.size} members (weights={WeightSource(source).value}, calibrate={mode.value})")
    return outcome
