import logging
from typing import List

import numpy as np
from pydantic import BaseModel

from ..core.predictions import EnsemblePredictions
from ..metrics.regions import top_predictions
from .combination import combine_arrays, resolve_weights

logger = logging.getLogger(__name__)


class ConfidenceBoundReport(BaseModel):
    ensemble_confidence: float
    member_confidence: float
    member_confidences: List[float]
    confidence_bound_holds: bool
    ensemble_accuracy: float
    member_accuracy: float
    member_accuracies: List[float]
    accuracy_bound_holds: bool
    confidence_below_member_accuracy: bool
    per_sample_violations: int


def confidence_bound_report(ens: EnsemblePredictions, weights) -> ConfidenceBoundReport:
    """Ensemble confidence and accuracy against the (weighted) member averages.

    The member side of each comparison is accumulated in the same member
    order as the combination itself, so the confidence bound can be checked
    without a tolerance.
    """
    ens = ens.probabilities()
    w = resolve_weights(weights, ens.size)
    labels = np.asarray(ens.labels)
    rows = np.arange(ens.n_samples)
    stack = ens.stack

    combined = combine_arrays(stack, w)
    ensemble_class, ensemble_conf = top_predictions(combined)

    member_max = []
    member_acc = []
    violations = 0
    for probs in stack:
        member_class, confidence = top_predictions(probs)
        member_max.append(confidence)
        member_acc.append(float(np.mean(member_class == labels)))
        violations += int(np.sum(probs[rows, ensemble_class] > confidence))

    bound = combine_arrays(member_max, w)
    ensemble_confidence = float(np.mean(ensemble_conf))
    member_confidence = float(np.mean(bound))
    ensemble_accuracy = float(np.mean(ensemble_class == labels))
    member_accuracy = float(np.dot(w, member_acc))

    report = ConfidenceBoundReport(
        ensemble_confidence=ensemble_confidence,
        member_confidence=member_confidence,
        member_confidences=[float(np.mean(c)) for c in member_max],
        confidence_bound_holds=ensemble_confidence <= member_confidence,
        ensemble_accuracy=ensemble_accuracy,
        member_accuracy=member_accuracy,
        member_accuracies=member_acc,
        accuracy_bound_holds=ensemble_accuracy <= member_accuracy,
        confidence_below_member_accuracy=ensemble_confidence <= member_accuracy,
        per_sample_violations=violations,
    )
    if violations:
        logger.error(f"{violations} per-sample confidence bound violations")
    return report
