import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..core.binning import BinningScheme
from ..core.config import get_settings
from ..core.constants import BinningMode, Optimizer, PredictionKind
from ..core.errors import InvalidParameterError
from ..core.parallel import ordered_map
from ..core.predictions import EnsemblePredictions, LogitSet, log_probs, softmax_rows
from ..ensemble.combination import combine, combine_arrays
from ..metrics.calibration_errors import ece_array
from ..metrics.regions import top_predictions
from ..performance.benchmark import benchmark_operation
from .optimizers import SearchResult, grid_refine, projected_descent
from .temperature import TemperatureModel, scale_array, scale_dynamic_array

logger = logging.getLogger(__name__)


class FitConfig(BaseModel):
    """How temperatures are searched; the objective is always top-label ECE"""

    optimizer: Optimizer = Optimizer.GRID
    t_min: float = Field(0.05, gt=0)
    t_max: float = 10.0
    grid_size: int = Field(200, ge=2)
    golden_tolerance: float = Field(1e-7, gt=0)
    scan_resolution: Optional[int] = Field(100000, ge=2)
    refine_candidates: int = Field(8, ge=1)
    learning_rate: float = Field(0.1, gt=0)
    iterations: int = Field(400, ge=1)
    sweeps: int = Field(3, ge=1)
    bins: int = Field(15, ge=1)
    binning: BinningMode = BinningMode.FIXED_WIDTH

    @model_validator(mode="after")
    def check_range(self):
        if not self.t_min < 1.0 < self.t_max:
            raise ValueError(f"search range [{self.t_min}, {self.t_max}] must contain 1")
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "FitConfig":
        settings = get_settings()
        defaults = dict(
            t_min=settings.fit.t_min,
            t_max=settings.fit.t_max,
            grid_size=settings.fit.grid_size,
            golden_tolerance=settings.fit.golden_tolerance,
            scan_resolution=settings.fit.scan_resolution,
            refine_candidates=settings.fit.refine_candidates,
            learning_rate=settings.fit.sgd_learning_rate,
            iterations=settings.fit.sgd_iterations,
            sweeps=settings.fit.dynamic_sweeps,
            bins=settings.bins,
        )
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)

    def scheme(self) -> BinningScheme:
        return BinningScheme(self.bins, self.binning)


@dataclass
class FitResult:
    model: TemperatureModel
    ece: float
    ece_at_one: float
    optimizer: Optimizer
    evaluations: int = 0
    member_results: List["FitResult"] = field(default_factory=list)

    @property
    def temperature(self) -> float:
        return self.model.temperature

    def to_dict(self) -> dict:
        payload = {
            "model": self.model.to_dict(),
            "ece": self.ece,
            "ece_at_t1": self.ece_at_one,
            "optimizer": self.optimizer.value,
            "evaluations": self.evaluations,
        }
        if self.member_results:
            payload["members"] = [r.to_dict() for r in self.member_results]
        return payload


def _require_rows(logits: LogitSet) -> None:
    if logits.n_samples < 1:
        raise InvalidParameterError("cannot fit a temperature on empty input")


def _ece_gradient(z: np.ndarray, labels: np.ndarray, scheme: BinningScheme, t: float) -> float:
    """d ECE / d t with bin membership held fixed at the current t"""
    probs = softmax_rows(z / t)
    top_class, confidence = top_predictions(probs)
    rows = np.arange(z.shape[0])
    residual = confidence - (labels == top_class)
    ids, centers = scheme.assign(confidence)
    sums = np.bincount(ids, weights=residual, minlength=len(centers))
    expected_logit = np.sum(probs * z, axis=1)
    d_conf = -confidence * (z[rows, top_class] - expected_logit) / (t * t)
    return float(np.sum(np.sign(sums[ids]) * d_conf) / z.shape[0])


def _refine(objective, config: FitConfig) -> SearchResult:
    """Grid scan plus lattice refinement, as used for every single-temperature fit"""
    return grid_refine(
        objective,
        config.t_min,
        config.t_max,
        config.grid_size,
        config.golden_tolerance,
        resolution=config.scan_resolution,
        candidates=config.refine_candidates,
    )


def _search(z: np.ndarray, labels: np.ndarray, config: FitConfig) -> SearchResult:
    scheme = config.scheme()

    def objective(t: float) -> float:
        return ece_array(scale_array(z, t), labels, scheme)

    if config.optimizer == Optimizer.SGD:
        return projected_descent(
            objective,
            lambda t: _ece_gradient(z, labels, scheme, t),
            start=1.0,
            learning_rate=config.learning_rate,
            iterations=config.iterations,
            bounds=(config.t_min, config.t_max),
        )
    return _refine(objective, config)


def fit_temperature(logits: LogitSet, config: Optional[FitConfig] = None) -> FitResult:
    """Global temperature minimising validation ECE; never worse than t = 1"""
    config = config or FitConfig.from_settings()
    _require_rows(logits)
    z, labels = np.asarray(logits.logits), np.asarray(logits.labels)
    with benchmark_operation(f"fit_temperature[{config.optimizer.value}]"):
        at_one = ece_array(softmax_rows(z), labels, config.scheme())
        result = _search(z, labels, config)
    t, achieved = result.argmin, result.minimum
    if achieved > at_one or (achieved == at_one and t != 1.0):
        t, achieved = 1.0, at_one
    logger.info(f"Fitted global temperature t={t:.6f}: ECE {at_one:.6f} -> {achieved:.6f}")
    return FitResult(TemperatureModel.global_model(t), achieved, at_one, config.optimizer, result.evaluations)


def quantile_boundaries(confidence: np.ndarray, region_count: int) -> List[float]:
    """Equal-mass cut points of the max probabilities, deduplicated, inside (0, 1)"""
    if region_count < 1:
        raise InvalidParameterError(f"region count must be >= 1, got {region_count}")
    if region_count == 1:
        return []
    cuts = np.quantile(confidence, np.arange(1, region_count) / region_count)
    cuts = np.unique(cuts[(cuts > 0.0) & (cuts < 1.0)])
    if len(cuts) < region_count - 1:
        logger.warning(f"Quantile boundaries collapsed: {region_count} regions requested, {len(cuts) + 1} kept")
    return [float(c) for c in cuts]


def fit_dynamic(
    logits: LogitSet,
    region_count: int,
    config: Optional[FitConfig] = None,
    boundaries: Optional[Sequence[float]] = None,
) -> FitResult:
    """Region-based temperatures by block-coordinate descent on the total ECE.

    Every region starts at the global fit; each coordinate step re-scans one
    region's temperature with the other regions' bin sums held fixed and keeps
    it only on strict improvement. Empty regions inherit the left neighbour's
    temperature.
    """
    config = config or FitConfig.from_settings()
    _require_rows(logits)
    z, labels = np.asarray(logits.logits), np.asarray(logits.labels)
    scheme = config.scheme()
    n = z.shape[0]

    confidence_t1 = softmax_rows(z).max(axis=1)
    if boundaries is None:
        boundaries = quantile_boundaries(confidence_t1, region_count)
    global_fit = fit_temperature(logits, config)
    t_global = global_fit.temperature
    model = TemperatureModel.regional(boundaries, [t_global] * (len(boundaries) + 1))
    membership = model.region_of(confidence_t1)
    temps = list(model.temps)
    rows_of = [np.flatnonzero(membership == r) for r in range(len(temps))]

    def residual_rows(rows: np.ndarray, t: float):
        top_class, confidence = top_predictions(softmax_rows(z[rows] / t))
        return confidence, confidence - (labels[rows] == top_class)

    evaluations = 0
    with benchmark_operation(f"fit_dynamic[R={len(temps)}]"):
        for sweep in range(config.sweeps):
            for r, rows in enumerate(rows_of):
                if rows.size == 0:
                    continue
                fixed = None
                if not scheme.is_exact:
                    others = membership != r
                    top_class, confidence = top_predictions(_apply(z, membership, temps))
                    residual = confidence - (labels == top_class)
                    ids_o, centers = scheme.assign(confidence[others])
                    fixed = np.bincount(ids_o, weights=residual[others], minlength=len(centers))

                def objective(t: float, rows=rows, fixed=fixed, r=r) -> float:
                    if scheme.is_exact:
                        trial = list(temps)
                        trial[r] = t
                        return ece_array(_apply(z, membership, trial), labels, scheme)
                    conf_r, resid_r = residual_rows(rows, t)
                    ids_r, _ = scheme.assign(conf_r)
                    sums = fixed + np.bincount(ids_r, weights=resid_r, minlength=len(fixed))
                    return float(np.abs(sums).sum() / n)

                current = objective(temps[r])
                found = grid_refine(objective, config.t_min, config.t_max, config.grid_size, config.golden_tolerance)
                evaluations += found.evaluations + 1
                if found.minimum < current:
                    temps[r] = found.argmin
                logger.debug(f"sweep {sweep} region {r}: t={temps[r]:.6f} objective={min(found.minimum, current):.8f}")

    for r, rows in enumerate(rows_of):
        if rows.size == 0:
            temps[r] = temps[r - 1] if r > 0 else t_global

    fitted = TemperatureModel.regional(boundaries, temps)
    achieved = ece_array(scale_dynamic_array(z, fitted), labels, scheme)
    if achieved > global_fit.ece:
        fitted = TemperatureModel.regional(boundaries, [t_global] * len(temps))
        achieved = ece_array(scale_dynamic_array(z, fitted), labels, scheme)
    logger.info(f"Fitted {len(temps)} regional temperatures {np.round(temps, 4).tolist()}: ECE {achieved:.6f}")
    return FitResult(fitted, achieved, global_fit.ece_at_one, Optimizer.GRID, evaluations + global_fit.evaluations)


def _apply(z: np.ndarray, membership: np.ndarray, temps: Sequence[float]) -> np.ndarray:
    return softmax_rows(z / np.asarray(temps)[membership][:, np.newaxis])


def _logit_ensemble(ens: EnsemblePredictions) -> EnsemblePredictions:
    if ens.kind != PredictionKind.LOGITS:
        raise InvalidParameterError("temperature fitting of members needs logit inputs")
    return ens


def fit_per_member(ens: EnsemblePredictions, config: Optional[FitConfig] = None) -> FitResult:
    """One global temperature per member, each fitted on that member's own ECE"""
    config = config or FitConfig.from_settings()
    results = [fit_temperature(member, config) for member in _logit_ensemble(ens).members]
    model = TemperatureModel.per_member([r.temperature for r in results])
    mean_ece = float(np.mean([r.ece for r in results]))
    mean_at_one = float(np.mean([r.ece_at_one for r in results]))
    evaluations = sum(r.evaluations for r in results)
    return FitResult(model, mean_ece, mean_at_one, config.optimizer, evaluations, member_results=results)


def fit_pre_shared(ens: EnsemblePredictions, weights, config: Optional[FitConfig] = None) -> FitResult:
    """One temperature shared by all members before combination, fitted on the ensemble ECE"""

    config = config or FitConfig.from_settings()
    stack, labels = np.asarray(_logit_ensemble(ens).stack), np.asarray(ens.labels)
    w = np.asarray(weights.w if hasattr(weights, "w") else weights, dtype=np.float64)
    scheme = config.scheme()

    def objective(t: float) -> float:
        return ece_array(combine_arrays([scale_array(member, t) for member in stack], w), labels, scheme)

    at_one = objective(1.0)
    found = _refine(objective, config)
    t, achieved = (found.argmin, found.minimum) if found.minimum < at_one else (1.0, at_one)
    logger.info(f"Fitted shared pre-combination temperature t={t:.6f}: ECE {at_one:.6f} -> {achieved:.6f}")
    return FitResult(TemperatureModel.global_model(t), achieved, at_one, Optimizer.GRID, found.evaluations)


def fit_post(
    ens: EnsemblePredictions,
    weights,
    config: Optional[FitConfig] = None,
    regions: Optional[int] = None,
) -> FitResult:
    """Temperature fitted on the log of the combined probabilities"""

    combined = combine(ens.probabilities(), weights)
    surrogate = log_probs(combined)
    if regions is None:
        return fit_temperature(surrogate, config)
    return fit_dynamic(surrogate, regions, config)


def ece_temperature_curve(logits: LogitSet, temps: Sequence[float], scheme: Optional[BinningScheme] = None) -> np.ndarray:
    """ECE of scale(logits, t) for each t"""
    scheme = scheme or BinningScheme.fixed(get_settings().bins)
    z, labels = np.asarray(logits.logits), np.asarray(logits.labels)
    return np.array(ordered_map(lambda t: ece_array(scale_array(z, t), labels, scheme), temps))


@dataclass
class TemperatureCurve:
    temperatures: List[float]
    ensemble: List[float]
    members: List[List[float]]

    def optimum(self) -> float:
        return self.temperatures[int(np.argmin(self.ensemble))]

    def member_optima(self) -> List[float]:
        return [self.temperatures[int(np.argmin(curve))] for curve in self.members]

    def to_dict(self) -> dict:
        return {"temperatures": self.temperatures, "ensemble": self.ensemble, "members": self.members}


def ensemble_ece_temperature_curve(
    ens: EnsemblePredictions, weights, temps: Sequence[float], scheme: Optional[BinningScheme] = None
) -> TemperatureCurve:
    """Member and ensemble ECE when one temperature is applied to every member before combining"""

    scheme = scheme or BinningScheme.fixed(get_settings().bins)
    stack, labels = np.asarray(_logit_ensemble(ens).stack), np.asarray(ens.labels)
    w = np.asarray(weights.w if hasattr(weights, "w") else weights, dtype=np.float64)
    members: List[List[float]] = [[] for _ in range(len(stack))]
    combined: List[float] = []
    for t in temps:
        scaled = [scale_array(member, t) for member in stack]
        for m, probs in enumerate(scaled):
            members[m].append(ece_array(probs, labels, scheme))
        combined.append(ece_array(combine_arrays(scaled, w), labels, scheme))
    return TemperatureCurve([float(t) for t in temps], combined, members)
