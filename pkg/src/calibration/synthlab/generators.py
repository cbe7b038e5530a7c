import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..core.constants import PROBABILITY_FLOOR
from ..core.parallel import ordered_map
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet, softmax_rows
from ..performance.benchmark import benchmark_operation
from .distribution import PiecewiseDistributionModel
from .rng import MEMBER_STREAM_OFFSET, SeedStreams

logger = logging.getLogger(__name__)


class SynthesisConfig(BaseModel):
    bin_size: int = Field(2, ge=1)
    n_classes: int = Field(4, ge=2)
    members: int = Field(10, ge=1)
    samples: int = Field(10000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    concentration: float = Field(1.0, gt=0)

    def streams(self) -> SeedStreams:
        return SeedStreams(self.seed)


@dataclass
class TruthSample:
    truth: np.ndarray
    labels: np.ndarray

    def as_prediction_set(self) -> LabeledPredictionSet:
        return LabeledPredictionSet(self.truth, self.labels)


def _dirichlet_rows(rng: np.random.Generator, n: int, k: int, concentration: float) -> np.ndarray:
    if concentration == 1.0:
        draws = rng.standard_exponential((n, k))
    else:
        draws = rng.standard_gamma(concentration, (n, k))
    return draws / draws.sum(axis=1, keepdims=True)


def sample_labels(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row by inverting the row CDF"""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((u[:, np.newaxis] >= cdf).sum(axis=1), probs.shape[1] - 1)


def sample_dirichlet_truth(config: SynthesisConfig) -> TruthSample:
    """N rows drawn from a symmetric Dirichlet and one label sampled from each row"""
    streams = config.streams()
    truth = _dirichlet_rows(streams.truth(), config.samples, config.n_classes, config.concentration)
    labels = sample_labels(streams.labels(), truth)
    return TruthSample(truth, labels)


def _bin_average(values: np.ndarray, order: np.ndarray, bin_size: int) -> np.ndarray:
    """Every row gets the mean of its bin, bins taken in `order` chunks of bin_size"""
    n, k = values.shape
    bin_of = np.empty(n, dtype=np.int64)
    bin_of[order] = np.arange(n) // bin_size
    n_bins = int(bin_of.max()) + 1
    counts = np.bincount(bin_of, minlength=n_bins).astype(np.float64)
    sums = np.stack([np.bincount(bin_of, weights=values[:, j], minlength=n_bins) for j in range(k)], axis=1)
    return (sums / counts[:, np.newaxis])[bin_of]


def gen_calibrated_members(truth: np.ndarray, labels: np.ndarray, config: SynthesisConfig) -> EnsemblePredictions:
    """Members that are exactly calibrated on their own exact-value regions.

    Each member shuffles the samples with its own stream, cuts them into bins
    of `bin_size` (the last bin may be short) and predicts the bin's average
    true distribution for every sample in it.
    """
    truth = np.asarray(truth, dtype=np.float64)
    streams = config.streams()

    def member(m: int) -> LabeledPredictionSet:
        order = streams.member(m).permutation(truth.shape[0])
        return LabeledPredictionSet(_bin_average(truth, order, config.bin_size), labels)

    with benchmark_operation(f"gen_calibrated_members[M={config.members}]"):
        members = ordered_map(member, range(config.members))
    logger.info(f"Generated {config.members} calibrated members (b={config.bin_size}, N={truth.shape[0]})")
    return EnsemblePredictions(members)


def balanced_labels(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Labels with class counts as equal as n allows, in shuffled order"""
    labels = np.tile(np.arange(k), -(-n // k))[:n]
    return SeedStreams(seed).labels().permutation(labels)


def class_count_warning(labels: np.ndarray, k: int) -> Optional[str]:
    counts = np.bincount(labels, minlength=k)
    if counts.min() != counts.max():
        return f"unequal class counts {counts.tolist()}; the population analysis assumes equal counts"
    return None


def gen_binned_predictions(labels: np.ndarray, config: SynthesisConfig) -> LabeledPredictionSet:
    """Shuffle, bin, and predict each bin's empirical one-hot average"""
    labels = np.asarray(labels, dtype=np.int64)
    warning = class_count_warning(labels, config.n_classes)
    if warning:
        logger.warning(warning)
    order = config.streams().stream(MEMBER_STREAM_OFFSET).permutation(labels.shape[0])
    encoded = np.zeros((labels.shape[0], config.n_classes))
    encoded[np.arange(labels.shape[0]), labels] = 1.0
    return LabeledPredictionSet(_bin_average(encoded, order, config.bin_size), labels)


def bin_type_frequencies(
    preds: LabeledPredictionSet, class_index: int, values: Sequence[float] = (1.0, 0.5, 0.0)
) -> Dict[float, float]:
    """Fraction of samples whose predicted probability for `class_index` equals each value"""
    column = preds.probs[:, class_index]
    return {float(v): float(np.mean(column == v)) for v in values}


def _calibrated_logits(config: SynthesisConfig):
    """Log of Dirichlet rows (floored) and labels drawn from their softmax"""
    streams = config.streams()
    probs = _dirichlet_rows(streams.truth(), config.samples, config.n_classes, config.concentration)
    logits = np.log(np.maximum(probs, PROBABILITY_FLOOR))
    labels = sample_labels(streams.labels(), softmax_rows(logits))
    return logits, labels


def gen_scaled_logits(config: SynthesisConfig, scale: float) -> LogitSet:
    """Calibrated logits multiplied by `scale`; temperature `scale` undoes it"""
    logits, labels = _calibrated_logits(config)
    return LogitSet(logits * scale, labels)


def gen_mixed_confidence_logits(config: SynthesisConfig, over: float = 2.0, under: float = 0.5) -> LogitSet:
    """Half the rows scaled by `over`, the other half by `under`"""
    logits, labels = _calibrated_logits(config)
    factors = np.where(np.arange(logits.shape[0]) % 2 == 0, over, under)
    return LogitSet(logits * factors[:, np.newaxis], labels)


def gen_overconfident_members(config: SynthesisConfig, scale: float = 2.0, noise: float = 1.0) -> EnsemblePredictions:
    """Members = scale * (calibrated logits + member-specific Gaussian noise)"""
    logits, labels = _calibrated_logits(config)
    streams = config.streams()
    members = [
        LogitSet(scale * (logits + noise * streams.member(m).standard_normal(logits.shape)), labels)
        for m in range(config.members)
    ]
    return EnsemblePredictions(members)


@dataclass
class SyntheticDataset:
    truth: np.ndarray
    labels: np.ndarray
    ensemble: EnsemblePredictions


def calibrated_member_dataset(config: SynthesisConfig) -> SyntheticDataset:
    """Dirichlet truth, sampled labels and calibrated members in one call"""
    sample = sample_dirichlet_truth(config)
    return SyntheticDataset(sample.truth, sample.labels, gen_calibrated_members(sample.truth, sample.labels, config))


def sample_distribution_model(model: PiecewiseDistributionModel, config: SynthesisConfig) -> SyntheticDataset:
    """Draw N inputs from a finite-region model.

    Each sample lands in a region with probability equal to its mass, is
    predicted with the region's predicted row and labelled from its true row.
    """
    streams = config.streams()
    region = streams.truth().choice(model.n_regions, size=config.samples, p=model.masses)
    truth = model.true_posteriors[region]
    labels = sample_labels(streams.labels(), truth)
    preds = LabeledPredictionSet(model.predicted_posteriors[region], labels)
    return SyntheticDataset(truth, labels, EnsemblePredictions([preds]))
