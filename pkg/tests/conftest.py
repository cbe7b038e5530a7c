import os

import numpy as np
import pytest

from src.calibration.core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet
from src.calibration.synthlab.generators import SynthesisConfig, calibrated_member_dataset

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def rng():
    """Fixed-seed generator for randomized property tests"""
    return np.random.default_rng(20240607)


@pytest.fixture
def one_hot_correct():
    """Predictions that put all mass on the true label"""
    labels = np.array([0, 1, 2, 1, 0])
    probs = np.eye(3)[labels]
    return LabeledPredictionSet(probs, labels)


@pytest.fixture
def two_sample_preds():
    return LabeledPredictionSet([[0.8, 0.2], [0.8, 0.2]], [0, 1])


def _random_simplex(rng, n, k, concentration=1.0):
    draws = rng.gamma(concentration, size=(n, k))
    return draws / draws.sum(axis=1, keepdims=True)


@pytest.fixture
def simplex_rows(rng):
    """Factory for N x K random probability rows"""
    return lambda n, k, concentration=1.0: _random_simplex(rng, n, k, concentration)


@pytest.fixture
def random_ensemble(rng):
    """Factory for M random probability members sharing random labels"""

    def build(m, n, k):
        labels = rng.integers(0, k, size=n)
        return EnsemblePredictions([LabeledPredictionSet(_random_simplex(rng, n, k), labels) for _ in range(m)])

    return build


@pytest.fixture
def small_logits(rng):
    labels = rng.integers(0, 4, size=200)
    return LogitSet(rng.normal(size=(200, 4)) * 2.0, labels)


@pytest.fixture(scope="session")
def calibrated_members():
    """Algorithm-1 style ensemble: b=2, K=4, M=10, N=10^4"""
    return calibrated_member_dataset(SynthesisConfig(bin_size=2, n_classes=4, members=10, samples=10000, seed=7))


@pytest.fixture
def cifar_like_path():
    """Checked-in 100-sample, 100-class logit dump"""
    return os.path.join(FIXTURE_DIR, "cifar_like_logits.csv")
