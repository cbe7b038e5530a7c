import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from ..core.binning import BinningScheme
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet
from ..ensemble.combination import CombinationWeights, combine
from ..metrics.calibration_errors import ace, ece

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["bins", "ace", "ece", "source"]


@dataclass
class SweepRow:
    bins: Optional[int]
    ace: float
    ece: float
    source: str

    def as_list(self) -> list:
        return [self.bins if self.bins is not None else "exact", self.ace, self.ece, self.source]


def _schemes(bin_counts: Sequence[int], include_exact: bool) -> List[BinningScheme]:
    schemes = [BinningScheme.fixed(b) for b in sorted(set(bin_counts), reverse=True)]
    if include_exact:
        schemes.append(BinningScheme.exact())
    return schemes


def epsilon_sweep(
    data: Union[LabeledPredictionSet, EnsemblePredictions],
    bin_counts: Sequence[int],
    weights: Optional[CombinationWeights] = None,
    include_members: bool = False,
    include_exact: bool = False,
    targets=None,
) -> List[SweepRow]:
    """ACE and ECE across bin counts (coarsest last), for the ensemble and optionally each member"""
    sources = []
    if isinstance(data, EnsemblePredictions):
        weights = weights or CombinationWeights.uniform(data.size)
        sources.append(("ensemble", combine(data, weights)))
        if include_members:
            probs = data.probabilities()
            sources.extend((f"member_{m + 1}", probs.member(m)) for m in range(probs.size))
    else:
        sources.append(("predictions", data))

    rows = []
    for scheme in _schemes(bin_counts, include_exact):
        for name, preds in sources:
            rows.append(SweepRow(scheme.bin_count, ace(preds, scheme, targets), ece(preds, scheme, targets), name))
    logger.info(f"Swept {len(rows)} (bins, source) combinations")
    return rows
