import logging
from typing import List, Optional, Union

from pydantic import BaseModel, Field

from ..core.binning import BinningScheme
from ..core.config import get_settings
from ..core.predictions import LabeledPredictionSet
from .calibration_errors import accuracy, ace, acce, ece, ecce, global_gaps, nll
from .kernel import skce_details

logger = logging.getLogger(__name__)

SCALAR_COLUMNS = [
    "n_samples",
    "n_classes",
    "binning",
    "bin_count",
    "accuracy",
    "nll",
    "ace",
    "acce",
    "ece",
    "ecce",
    "skce",
    "global_gap_top_label",
]


class MetricReport(BaseModel):
    n_samples: int
    n_classes: int
    binning: str
    bin_count: Optional[int] = None
    accuracy: float = Field(..., ge=0, le=1)
    nll: float = Field(..., ge=0)
    ace: float = Field(..., ge=0)
    acce: float = Field(..., ge=0)
    ece: float = Field(..., ge=0)
    ecce: float = Field(..., ge=0)
    skce: Optional[float] = None
    skce_bandwidth: Optional[float] = None
    skce_subsampled: Optional[bool] = None
    global_gap_all_label: List[float]
    global_gap_top_label: float

    def csv_columns(self) -> List[str]:
        gaps = [f"global_gap_all_label_{j}" for j in range(1, self.n_classes + 1)]
        return SCALAR_COLUMNS + gaps

    def csv_row(self) -> list:
        values = self.model_dump()
        return [values[column] for column in SCALAR_COLUMNS] + list(self.global_gap_all_label)


def evaluate(
    preds: LabeledPredictionSet,
    scheme: Optional[BinningScheme] = None,
    skce: bool = False,
    bandwidth: Union[float, str] = "auto",
    targets=None,
) -> MetricReport:
    """Full metric suite for one prediction set"""
    settings = get_settings()
    scheme = scheme if scheme is not None else BinningScheme.fixed(settings.bins)
    all_label, top_label = global_gaps(preds, targets)
    report = MetricReport(
        n_samples=preds.n_samples,
        n_classes=preds.n_classes,
        binning=scheme.mode.value,
        bin_count=scheme.bin_count,
        accuracy=accuracy(preds, targets),
        nll=nll(preds, settings.nll_floor, targets),
        ace=ace(preds, scheme, targets),
        acce=acce(preds, scheme, targets),
        ece=ece(preds, scheme, targets),
        ecce=ecce(preds, scheme, targets),
        global_gap_all_label=[float(g) for g in all_label],
        global_gap_top_label=top_label,
    )
    if skce:
        result = skce_details(
            preds,
            bandwidth,
            max_rows=settings.skce.max_rows,
            bandwidth_sample=settings.skce.bandwidth_sample,
            block_rows=settings.skce.block_rows,
        )
        report.skce = result.value
        report.skce_bandwidth = result.bandwidth
        report.skce_subsampled = result.subsampled
    logger.debug(f"Evaluated {preds!r}: ece={report.ece:.6f} ace={report.ace:.6f}")
    return report
