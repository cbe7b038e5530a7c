import numpy as np
import pytest

from src.calibration.core.errors import InvalidParameterError, ShapeMismatchError
from src.calibration.core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet
from src.calibration.ensemble.weights import (
    binary_auc,
    fit_weights_auc,
    fit_weights_max_ll,
    macro_auc,
    member_aucs,
)
from src.calibration.scaling.temperature import TemperatureModel


@pytest.fixture
def dominated_ensemble(rng):
    """Member 0 gives the true label 0.9, member 1 is uniform"""
    labels = rng.integers(0, 4, size=200)
    sharp = np.full((200, 4), 0.1 / 3)
    sharp[np.arange(200), labels] = 0.9
    flat = np.full((200, 4), 0.25)
    return EnsemblePredictions([LabeledPredictionSet(sharp, labels), LabeledPredictionSet(flat, labels)])


class TestMaxLikelihoodWeights:

    def test_dominant_member_takes_the_weight(self, dominated_ensemble):
        result = fit_weights_max_ll(dominated_ensemble)
        assert result.weights.w[0] >= 0.999

    def test_history_never_decreases(self, random_ensemble):
        result = fit_weights_max_ll(random_ensemble(4, 150, 3), iterations=200)
        assert np.all(np.diff(result.history) >= 0.0)
        assert result.objective == result.history[-1]

    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_starting_point_does_not_matter(self, random_ensemble, m):
        ens = random_ensemble(m, 100, 3)
        skewed = np.full(m, 0.2 / (m - 1))
        skewed[0] = 0.8
        a = fit_weights_max_ll(ens)
        b = fit_weights_max_ll(ens, initial=skewed)
        assert a.objective == pytest.approx(b.objective, abs=1e-8)

    def test_identical_members_keep_uniform_weights(self, random_ensemble):
        member = random_ensemble(1, 50, 3).member(0)
        result = fit_weights_max_ll(EnsemblePredictions([member] * 3))
        assert np.allclose(result.weights.w, 1 / 3, atol=1e-12)

    def test_result_serializes(self, random_ensemble):
        payload = fit_weights_max_ll(random_ensemble(2, 30, 3), iterations=10).to_dict()
        assert set(payload) == {"weights", "objective", "iterations"}
        assert sum(payload["weights"]) == pytest.approx(1.0)

    def test_initial_weight_count(self, random_ensemble):
        with pytest.raises(ShapeMismatchError):
            fit_weights_max_ll(random_ensemble(3, 10, 3), initial=[0.5, 0.5])

    def test_invalid_step(self, random_ensemble):
        with pytest.raises(InvalidParameterError):
            fit_weights_max_ll(random_ensemble(2, 10, 3), step=0.0)


class TestAuc:

    def test_binary_reference_value(self):
        assert binary_auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == pytest.approx(0.75)

    def test_ties_count_half(self):
        assert binary_auc([0.5, 0.5], [False, True]) == 0.5

    def test_binary_needs_both_classes(self):
        with pytest.raises(InvalidParameterError):
            binary_auc([0.1, 0.2], [True, True])

    def test_perfect_ranking(self, one_hot_correct):
        assert macro_auc(one_hot_correct.probs, one_hot_correct.labels) == 1.0

    def test_single_class_labels(self):
        with pytest.raises(InvalidParameterError):
            macro_auc(np.array([[0.6, 0.4], [0.7, 0.3]]), np.array([0, 0]))

    def test_monotone_transform_keeps_auc(self, rng):
        scores = rng.normal(size=300)
        positives = rng.random(300) < 0.4
        assert abs(binary_auc(scores, positives) - binary_auc(np.exp(2.0 * scores) + 1.0, positives)) <= 1e-12

    def test_monotone_transform_keeps_macro_auc(self, simplex_rows, rng):
        probs = simplex_rows(300, 4)
        labels = rng.integers(0, 4, size=300)
        assert abs(macro_auc(probs, labels) - macro_auc(np.log(probs) * 3.0 - 1.0, labels)) <= 1e-12


class TestAucWeights:

    def test_weights_proportional_to_auc(self, random_ensemble):
        ens = random_ensemble(3, 80, 3)
        aucs = np.array(member_aucs(ens))
        weights = fit_weights_auc(ens)
        assert np.allclose(weights.w, aucs / aucs.sum(), atol=1e-15)

    def test_better_ranker_gets_more_weight(self, dominated_ensemble, rng):
        labels = dominated_ensemble.labels
        noisy = rng.dirichlet(np.ones(4), size=200)
        ens = EnsemblePredictions([dominated_ensemble.member(0), LabeledPredictionSet(noisy, labels)])
        weights = fit_weights_auc(ens)
        assert weights.w[0] > weights.w[1]

    def test_perfect_and_random_rankers(self, rng):
        labels = rng.integers(0, 2, size=2000)
        perfect = np.where(labels[:, np.newaxis] == np.arange(2), 0.9, 0.1)
        u = rng.random(2000)
        uniform = np.column_stack([u, 1.0 - u])
        ens = EnsemblePredictions([LabeledPredictionSet(perfect, labels), LabeledPredictionSet(uniform, labels)])
        aucs = member_aucs(ens)
        assert aucs[0] == pytest.approx(1.0, abs=1e-12)
        assert aucs[1] == pytest.approx(0.5, abs=0.05)
        weights = fit_weights_auc(ens)
        assert weights.w[0] == pytest.approx(2 / 3, abs=0.02)
        assert weights.w[1] == pytest.approx(1 / 3, abs=0.02)

    def test_calibrated_weights_need_logits(self, random_ensemble):
        with pytest.raises(InvalidParameterError):
            fit_weights_auc(random_ensemble(2, 20, 3), TemperatureModel.global_model(1.0))

    def test_calibrated_weights_stay_on_the_simplex(self, rng):
        labels = rng.integers(0, 3, size=100)
        ens = EnsemblePredictions([LogitSet(rng.normal(size=(100, 3)), labels) for _ in range(2)])
        plain = fit_weights_auc(ens)
        scaled = fit_weights_auc(ens, TemperatureModel.global_model(2.0))
        assert plain.size == scaled.size == 2
        assert abs(scaled.w.sum() - 1.0) <= 1e-12
