import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.special import softmax as _scipy_softmax

from .constants import (
    PredictionKind,
    PROBABILITY_FLOOR,
    RENORMALIZE_TOLERANCE,
    ROW_SUM_TOLERANCE,
)
from .errors import ErrorCode, InvalidParameterError, InvalidPredictionsError, ShapeMismatchError

logger = logging.getLogger(__name__)


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _check_matrix(matrix: np.ndarray, labels: np.ndarray) -> None:
    if matrix.ndim != 2:
        raise InvalidPredictionsError(ErrorCode.SHAPE, f"expected an N x K matrix, got {matrix.ndim} dims")
    n, k = matrix.shape
    if n < 1 or k < 2:
        raise InvalidPredictionsError(ErrorCode.SHAPE, f"need N >= 1 and K >= 2, got N={n}, K={k}")
    if labels.ndim != 1 or labels.shape[0] != n:
        raise InvalidPredictionsError(
            ErrorCode.SHAPE, f"label vector length {labels.shape[0] if labels.ndim else 0} does not match N={n}"
        )
    bad = ~np.isfinite(matrix).all(axis=1)
    if bad.any():
        row = int(np.argmax(bad))
        raise InvalidPredictionsError(ErrorCode.NON_FINITE, f"row {row} has non-finite entries", row=row)
    out_of_range = (labels < 0) | (labels >= k)
    if out_of_range.any():
        row = int(np.argmax(out_of_range))
        raise InvalidPredictionsError(ErrorCode.LABEL_RANGE, "label out of range", row=row)


class LabeledPredictionSet:
    """N x K class probabilities with 0-based true labels.

    Rows whose sum is off by at most 1e-6 are renormalized with a warning;
    larger deviations are rejected.
    """

    kind = PredictionKind.PROBS

    def __init__(self, probs, labels):
        probs = np.asarray(probs, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        _check_matrix(probs, labels)

        outside = ((probs < 0.0) | (probs > 1.0)).any(axis=1)
        if outside.any():
            row = int(np.argmax(outside))
            raise InvalidPredictionsError(
                ErrorCode.PROBABILITY_RANGE, f"row {row} has entries outside [0, 1]", row=row
            )

        deviation = np.abs(probs.sum(axis=1) - 1.0)
        if (deviation > RENORMALIZE_TOLERANCE).any():
            row = int(np.argmax(deviation > RENORMALIZE_TOLERANCE))
            raise InvalidPredictionsError(
                ErrorCode.ROW_SUM, f"row {row} sums to {probs[row].sum():.10g}", row=row
            )
        drifted = deviation > ROW_SUM_TOLERANCE
        if drifted.any():
            logger.warning(f"Renormalizing {int(drifted.sum())} rows with sum drift <= {RENORMALIZE_TOLERANCE}")
            probs = probs.copy()
            probs[drifted] /= probs[drifted].sum(axis=1, keepdims=True)

        self.probs = _frozen(probs, np.float64)
        self.labels = _frozen(labels, np.int64)

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.probs

    def _adopt(self, values: np.ndarray) -> None:
        self.probs = values

    def predicted_classes(self) -> np.ndarray:
        """Argmax per row; ties resolve to the lowest class index"""
        return np.argmax(self.probs, axis=1)

    def confidences(self) -> np.ndarray:
        return self.probs.max(axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
        }

    def __repr__(self) -> str:
        return f"LabeledPredictionSet(N={self.n_samples}, K={self.n_classes})"


class LogitSet:
    """N x K unbounded logits with 0-based true labels"""

    kind = PredictionKind.LOGITS

    def __init__(self, logits, labels):
        logits = np.asarray(logits, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        _check_matrix(logits, labels)
        self.logits = _frozen(logits, np.float64)
        self.labels = _frozen(labels, np.int64)

    @property
    def n_samples(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.logits

    def _adopt(self, values: np.ndarray) -> None:
        self.logits = values

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
        }

    def __repr__(self) -> str:
        return f"LogitSet(N={self.n_samples}, K={self.n_classes})"


PredictionData = Union[LabeledPredictionSet, LogitSet]


class EnsemblePredictions:
    """M member prediction sets over the same samples and labels"""

    def __init__(self, members: Sequence[PredictionData]):
        members = list(members)
        if not members:
            raise ShapeMismatchError("an ensemble needs at least one member")
        first = members[0]
        for m, member in enumerate(members[1:], start=1):
            if member.kind != first.kind:
                raise ShapeMismatchError(f"member {m} is {member.kind.value}, member 0 is {first.kind.value}")
            if member.values.shape != first.values.shape:
                raise ShapeMismatchError(
                    f"member {m} has shape {member.values.shape}, member 0 has {first.values.shape}"
                )
            if not np.array_equal(member.labels, first.labels):
                raise ShapeMismatchError(f"member {m} labels differ from member 0")
        stack = np.stack([member.values for member in members])
        stack.flags.writeable = False
        self.stack = stack
        # members read from the shared stack so large ensembles are held once
        for m, member in enumerate(members):
            member._adopt(stack[m])
        self.members: List[PredictionData] = members

    @classmethod
    def from_stack(cls, stack, labels, kind: PredictionKind = PredictionKind.PROBS) -> "EnsemblePredictions":
        factory = LabeledPredictionSet if kind == PredictionKind.PROBS else LogitSet
        return cls([factory(values, labels) for values in np.asarray(stack)])

    @property
    def kind(self) -> PredictionKind:
        return self.members[0].kind

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def labels(self) -> np.ndarray:
        return self.members[0].labels

    @property
    def n_samples(self) -> int:
        return self.members[0].n_samples

    @property
    def n_classes(self) -> int:
        return self.members[0].n_classes

    def member(self, m: int) -> PredictionData:
        return self.members[m]

    def probabilities(self) -> "EnsemblePredictions":
        if self.kind == PredictionKind.PROBS:
            return self
        return EnsemblePredictions([softmax(member) for member in self.members])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "members": self.size,
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
        }

    def __repr__(self) -> str:
        return f"EnsemblePredictions(M={self.size}, N={self.n_samples}, K={self.n_classes}, kind={self.kind.value})"


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    message: str = ""
    row: Optional[int] = None


@dataclass
class ValidationReport:
    checks: List[ValidationCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[ValidationCheck]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "message": c.message, "row": c.row} for c in self.checks
            ],
        }


def validate(probs, labels, one_based: bool = False) -> ValidationReport:
    """Check raw arrays against the LabeledPredictionSet invariants without raising"""
    report = ValidationReport()
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)

    shape_ok = probs.ndim == 2 and probs.shape[0] >= 1 and probs.shape[1] >= 2
    shape_ok = shape_ok and labels.ndim == 1 and labels.shape[0] == probs.shape[0]
    report.checks.append(
        ValidationCheck("shape", shape_ok, "" if shape_ok else f"inconsistent shapes {probs.shape} / {labels.shape}")
    )
    if not shape_ok:
        return report

    def first_bad(mask: np.ndarray) -> Optional[int]:
        return int(np.argmax(mask)) if mask.any() else None

    row = first_bad(~np.isfinite(probs).all(axis=1))
    report.checks.append(
        ValidationCheck("finite", row is None, "" if row is None else f"row {row} has non-finite entries", row)
    )

    row = first_bad(((probs < 0.0) | (probs > 1.0)).any(axis=1))
    report.checks.append(
        ValidationCheck("range", row is None, "" if row is None else f"row {row} has entries outside [0, 1]", row)
    )

    sums = probs.sum(axis=1)
    row = first_bad(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)
    report.checks.append(
        ValidationCheck("row_sum", row is None, "" if row is None else f"row {row} sums to {sums[row]:.10g}", row)
    )

    offset = 1 if one_based else 0
    k = probs.shape[1]
    row = first_bad((labels < offset) | (labels >= k + offset) | (labels != np.round(labels)))
    report.checks.append(ValidationCheck("labels", row is None, "" if row is None else "label out of range", row))
    return report


def softmax_rows(values: np.ndarray) -> np.ndarray:
    return _scipy_softmax(values, axis=1)


def softmax(logits: LogitSet) -> LabeledPredictionSet:
    """Row-wise softmax with max-subtraction"""
    return LabeledPredictionSet(softmax_rows(logits.logits), logits.labels)


def log_probs(preds: LabeledPredictionSet, floor: float = PROBABILITY_FLOOR) -> LogitSet:
    if floor <= 0:
        raise InvalidParameterError(f"probability floor must be positive, got {floor}")
    return LogitSet(np.log(np.maximum(preds.probs, floor)), preds.labels)
