import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import rankdata

from ..core.config import get_settings
from ..core.constants import PredictionKind, PROBABILITY_FLOOR, TemperatureVariant
from ..core.errors import InvalidParameterError, ShapeMismatchError
from ..core.parallel import ordered_map
from ..core.predictions import EnsemblePredictions
from ..scaling.temperature import TemperatureModel, scale_array, scale_dynamic_array
from .combination import CombinationWeights

logger = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 60


@dataclass
class MaxLikelihoodResult:
    weights: CombinationWeights
    objective: float
    iterations: int
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.to_list(),
            "objective": self.objective,
            "iterations": self.iterations,
        }


def _true_label_probs(ens: EnsemblePredictions) -> np.ndarray:
    """N x M matrix of each member's probability for the true label"""
    stack = ens.probabilities().stack
    rows = np.arange(ens.n_samples)
    return np.stack([member[rows, ens.labels] for member in stack], axis=1)


def _log_likelihood(q: np.ndarray, w: np.ndarray, floor: float) -> float:
    return float(np.mean(np.log(np.maximum(q @ w, floor))))


def fit_weights_max_ll(
    ens: EnsemblePredictions,
    step: Optional[float] = None,
    iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
    initial=None,
    floor: float = PROBABILITY_FLOOR,
) -> MaxLikelihoodResult:
    """Simplex weights maximising mean log-likelihood of the combined true-label probability.

    Exponentiated-gradient ascent from `initial` (uniform by default). A step
    that would lower the objective is halved until it does not, so the
    objective history is non-decreasing.
    """
    defaults = get_settings().ensemble
    step = defaults.maxll_step if step is None else step
    iterations = defaults.maxll_iterations if iterations is None else iterations
    tolerance = defaults.maxll_tolerance if tolerance is None else tolerance
    if step <= 0 or iterations < 1:
        raise InvalidParameterError("Max-LL step must be positive and iterations >= 1")

    q = _true_label_probs(ens)
    m = q.shape[1]
    if (q.max(axis=1) <= 0).any():
        logger.warning(f"{int((q.max(axis=1) <= 0).sum())} samples have zero true-label probability under every member")

    w = np.full(m, 1.0 / m) if initial is None else np.array(CombinationWeights(initial).w)
    if w.size != m:
        raise ShapeMismatchError(f"{w.size} initial weights for {m} members")
    objective = _log_likelihood(q, w, floor)
    history = [objective]

    done = 0
    for done in range(1, iterations + 1):
        mixture = np.maximum(q @ w, floor)
        gradient = np.mean(q / mixture[:, np.newaxis], axis=0)
        eta = step
        for _ in range(MAX_STEP_HALVINGS):
            y = w * np.exp(eta * (gradient - gradient.max()))
            candidate = y / y.sum()
            value = _log_likelihood(q, candidate, floor)
            if value >= objective:
                break
            eta /= 2
        else:
            break
        gain = value - objective
        w, objective = candidate, value
        history.append(objective)
        if gain < tolerance:
            break
        if done % 100 == 0:
            logger.debug(f"Max-LL iteration {done}: objective={objective:.12f}")

    weights = CombinationWeights(w / w.sum())
    logger.info(f"Max-LL weights {np.round(weights.w, 4).tolist()} (objective {objective:.6f}, {done} iterations)")
    return MaxLikelihoodResult(weights, objective, done, history)


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties"""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidParameterError("AUC needs at least one positive and one negative sample")
    ranks = rankdata(scores, method="average")
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def macro_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean one-vs-rest AUC over classes that have both positives and negatives"""
    present = np.unique(labels)
    if present.size < 2:
        raise InvalidParameterError("AUC needs labels from at least two classes")
    aucs = [binary_auc(probs[:, j], labels == j) for j in range(probs.shape[1]) if j in present]
    return float(np.mean(aucs))


def _member_probs(ens: EnsemblePredictions, model: Optional[TemperatureModel]) -> List[np.ndarray]:
    if model is None:
        return list(ens.probabilities().stack)
    if ens.kind != PredictionKind.LOGITS:
        raise InvalidParameterError("calibrated AUC weights need logit members")
    if model.variant == TemperatureVariant.PER_MEMBER:
        if len(model.temps) != ens.size:
            raise ShapeMismatchError(f"{len(model.temps)} temperatures for {ens.size} members")
        return [scale_array(z, t) for z, t in zip(ens.stack, model.temps)]
    if model.variant == TemperatureVariant.REGIONAL:
        return [scale_dynamic_array(z, model) for z in ens.stack]
    return [scale_array(z, model.temperature) for z in ens.stack]


def fit_weights_auc(ens: EnsemblePredictions, model: Optional[TemperatureModel] = None) -> CombinationWeights:
    """w_m proportional to member m's macro one-vs-rest AUC"""
    labels = np.asarray(ens.labels)
    members = _member_probs(ens, model)
    aucs = np.asarray(ordered_map(lambda probs: macro_auc(probs, labels), members))
    if aucs.sum() <= 0:
        raise InvalidParameterError("all member AUCs are zero")
    weights = CombinationWeights(aucs / aucs.sum())
    logger.info(f"AUC weights {np.round(weights.w, 4).tolist()} from AUCs {np.round(aucs, 4).tolist()}")
    return weights


def member_aucs(ens: EnsemblePredictions) -> List[float]:
    labels = np.asarray(ens.labels)
    return [macro_auc(probs, labels) for probs in ens.probabilities().stack]


