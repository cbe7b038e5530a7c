import logging
from typing import Any, Dict, Iterable, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..core.constants import VerdictStatus
from ..core.errors import InvalidParameterError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet
from ..ensemble.combination import CombinationWeights, combine, resolve_weights
from ..metrics.calibration_errors import accuracy, global_gaps, target_matrix

logger = logging.getLogger(__name__)

LINEARITY_TOLERANCE = 1e-12
DEFAULT_TOLERANCE = 1e-9
ALL_PROPOSITIONS = (1, 2, 3, 4)


class Verdict(BaseModel):
    proposition: int
    status: VerdictStatus
    message: str
    details: Dict[str, Any] = Field(default_factory=dict)


class PropositionReport(BaseModel):
    tolerance: float
    verdicts: Dict[str, Verdict]

    @property
    def passed(self) -> bool:
        """Only an outright failure fails; unmet preconditions and missing witnesses do not"""
        return all(v.status != VerdictStatus.FAIL for v in self.verdicts.values())


def _canonical_partition(column: np.ndarray) -> np.ndarray:
    """Region ids numbered by first occurrence, so equal partitions compare equal"""
    _, first, inverse = np.unique(column, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse.ravel()]


def _accuracy_bound(members, ensemble, w, targets, tolerance) -> Verdict:
    member_top = [global_gaps(m, targets)[1] for m in members]
    ensemble_top = global_gaps(ensemble, targets)[1]
    member_acc = [accuracy(m, targets) for m in members]
    ensemble_acc = accuracy(ensemble, targets)
    mean_acc = float(np.dot(w, member_acc))
    details = {
        "member_top_label_gaps": member_top,
        "ensemble_top_label_gap": ensemble_top,
        "member_accuracies": member_acc,
        "mean_member_accuracy": mean_acc,
        "ensemble_accuracy": ensemble_acc,
    }
    calibrated = all(abs(g) <= tolerance for g in member_top) and abs(ensemble_top) <= tolerance
    if not calibrated:
        return Verdict(
            proposition=1,
            status=VerdictStatus.PRECONDITION_UNMET,
            message="members and ensemble are not all globally top-label calibrated",
            details=details,
        )
    holds = ensemble_acc <= mean_acc + tolerance
    return Verdict(
        proposition=1,
        status=VerdictStatus.PASS if holds else VerdictStatus.FAIL,
        message=f"ensemble accuracy {ensemble_acc:.6g} vs mean member accuracy {mean_acc:.6g}",
        details=details,
    )


def _gap_linearity(members, ensemble, w, targets, tolerance) -> Verdict:
    member_gaps = np.array([global_gaps(m, targets)[0] for m in members])
    ensemble_gap = global_gaps(ensemble, targets)[0]
    weighted = w @ member_gaps
    deviation = float(np.max(np.abs(ensemble_gap - weighted)))
    members_calibrated = bool(np.all(np.abs(member_gaps) <= tolerance))
    ensemble_calibrated = bool(np.all(np.abs(ensemble_gap) <= tolerance + LINEARITY_TOLERANCE))
    holds = deviation <= LINEARITY_TOLERANCE and (ensemble_calibrated or not members_calibrated)
    return Verdict(
        proposition=2,
        status=VerdictStatus.PASS if holds else VerdictStatus.FAIL,
        message=f"ensemble gap deviates from the weighted member gaps by {deviation:.3g}",
        details={
            "ensemble_gap": ensemble_gap.tolist(),
            "weighted_member_gap": weighted.tolist(),
            "max_deviation": deviation,
            "members_calibrated": members_calibrated,
            "ensemble_calibrated": ensemble_calibrated,
        },
    )


def _shared_regions(members, ensemble, w, targets, tolerance) -> Verdict:
    probs = [np.asarray(m.probs) for m in members]
    k = probs[0].shape[1]
    partitions = [[_canonical_partition(p[:, j]) for j in range(k)] for p in probs]
    shared = all(np.array_equal(partitions[0][j], other[j]) for other in partitions[1:] for j in range(k))
    if not shared:
        return Verdict(
            proposition=3,
            status=VerdictStatus.PRECONDITION_UNMET,
            message="members do not share identical exact-value regions",
        )

    target = target_matrix(probs[0], members[0].labels, targets)
    ensemble_probs = np.asarray(ensemble.probs)
    n = probs[0].shape[0]
    deviation = 0.0
    member_max_gap = 0.0
    ensemble_max_gap = 0.0
    for j in range(k):
        cells = partitions[0][j]
        n_cells = int(cells.max()) + 1
        member_gaps = np.array(
            [np.bincount(cells, weights=p[:, j] - target[:, j], minlength=n_cells) / n for p in probs]
        )
        ensemble_gaps = np.bincount(cells, weights=ensemble_probs[:, j] - target[:, j], minlength=n_cells) / n
        deviation = max(deviation, float(np.max(np.abs(ensemble_gaps - w @ member_gaps))))
        member_max_gap = max(member_max_gap, float(np.max(np.abs(member_gaps))))
        ensemble_max_gap = max(ensemble_max_gap, float(np.max(np.abs(ensemble_gaps))))

    members_calibrated = member_max_gap <= tolerance
    holds = deviation <= LINEARITY_TOLERANCE and (ensemble_max_gap <= tolerance + LINEARITY_TOLERANCE or not members_calibrated)
    return Verdict(
        proposition=3,
        status=VerdictStatus.PASS if holds else VerdictStatus.FAIL,
        message=f"per-region ensemble gaps deviate from weighted member gaps by {deviation:.3g}",
        details={
            "max_deviation": deviation,
            "member_max_region_gap": member_max_gap,
            "ensemble_max_region_gap": ensemble_max_gap,
            "members_calibrated": members_calibrated,
        },
    )


def _top_label_witness(members, ensemble, w, targets, tolerance) -> Verdict:
    member_top = [global_gaps(m, targets)[1] for m in members]
    ensemble_top = global_gaps(ensemble, targets)[1]
    details = {"member_top_label_gaps": member_top, "ensemble_top_label_gap": ensemble_top}
    found = all(abs(g) <= tolerance for g in member_top) and abs(ensemble_top) > tolerance
    if not found:
        return Verdict(
            proposition=4,
            status=VerdictStatus.NO_WITNESS,
            message="input does not exhibit top-label calibrated members with a miscalibrated ensemble",
            details=details,
        )
    direction = "under-confident" if ensemble_top < 0 else "over-confident"
    return Verdict(
        proposition=4,
        status=VerdictStatus.PASS,
        message=f"top-label calibrated members, {direction} ensemble (gap {ensemble_top:.6g})",
        details=details,
    )


CHECKS = {1: _accuracy_bound, 2: _gap_linearity, 3: _shared_regions, 4: _top_label_witness}


def verify_propositions(
    ens: EnsemblePredictions,
    weights: Optional[CombinationWeights] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    propositions: Iterable[int] = ALL_PROPOSITIONS,
    targets=None,
) -> PropositionReport:
    """Check the ensemble calibration propositions on concrete data.

    With `targets`, gaps are measured against true posteriors instead of the
    realized labels.
    """
    ens = ens.probabilities()
    weights = weights or CombinationWeights.uniform(ens.size)
    w = resolve_weights(weights, ens.size)
    members = ens.members
    ensemble: LabeledPredictionSet = combine(ens, weights)

    verdicts = {}
    for number in sorted(set(propositions)):
        if number not in CHECKS:
            raise InvalidParameterError(f"Unknown proposition {number}; expected one of {ALL_PROPOSITIONS}")
        verdict = CHECKS[number](members, ensemble, w, targets, tolerance)
        logger.info(f"P{number}: {verdict.status.value} - {verdict.message}")
        verdicts[f"P{number}"] = verdict
    return PropositionReport(tolerance=tolerance, verdicts=verdicts)
