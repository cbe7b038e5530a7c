import numpy as np
import pytest
from scipy.stats import kstest

from src.calibration.core.binning import BinningScheme
from src.calibration.core.errors import InvalidParameterError
from src.calibration.ensemble.combination import CombinationWeights, combine
from src.calibration.metrics.calibration_errors import ace, ece, global_gaps
from src.calibration.synthlab.distribution import (
    PiecewiseDistributionModel,
    dist_calibration_errors,
    example1_model,
    example3_population_model,
    region_gaps,
)
from src.calibration.synthlab.generators import (
    SynthesisConfig,
    balanced_labels,
    bin_type_frequencies,
    class_count_warning,
    gen_binned_predictions,
    sample_dirichlet_truth,
    sample_distribution_model,
)
from src.calibration.synthlab.rng import SeedStreams
from src.calibration.synthlab.sweep import epsilon_sweep


class TestSeedStreams:

    def test_streams_are_reproducible(self):
        a = SeedStreams(42).member(3).random(5)
        b = SeedStreams(42).member(3).random(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        streams = SeedStreams(42)
        assert not np.array_equal(streams.truth().random(5), streams.labels().random(5))

    def test_seed_range(self):
        with pytest.raises(InvalidParameterError):
            SeedStreams(-1)


class TestDirichletTruth:

    def test_binary_marginal_is_uniform(self):
        sample = sample_dirichlet_truth(SynthesisConfig(n_classes=2, samples=10000, seed=1))
        assert kstest(sample.truth[:, 0], "uniform").statistic < 0.02

    def test_rows_on_simplex(self):
        sample = sample_dirichlet_truth(SynthesisConfig(n_classes=5, samples=1000, seed=2))
        assert np.max(np.abs(sample.truth.sum(axis=1) - 1.0)) <= 1e-12
        assert sample.labels.min() >= 0 and sample.labels.max() < 5

    def test_same_seed_same_output(self):
        config = SynthesisConfig(samples=500, seed=3)
        a, b = sample_dirichlet_truth(config), sample_dirichlet_truth(config)
        assert np.array_equal(a.truth, b.truth)
        assert np.array_equal(a.labels, b.labels)

    def test_labels_follow_truth(self):
        sample = sample_dirichlet_truth(SynthesisConfig(n_classes=3, samples=50000, seed=4))
        frequencies = np.bincount(sample.labels, minlength=3) / 50000
        assert np.allclose(frequencies, sample.truth.mean(axis=0), atol=0.01)


class TestCalibratedMembers:

    def test_members_are_calibrated_on_exact_regions(self, calibrated_members):
        exact = BinningScheme.exact()
        for member in calibrated_members.ensemble.members:
            assert ece(member, exact, targets=calibrated_members.truth) <= 1e-10
            assert ace(member, exact, targets=calibrated_members.truth) <= 1e-10

    def test_member_global_gaps_vanish(self, calibrated_members):
        for member in calibrated_members.ensemble.members:
            gaps, top = global_gaps(member, targets=calibrated_members.truth)
            assert np.max(np.abs(gaps)) <= 1e-12
            assert abs(top) <= 1e-12

    def test_each_bin_shares_one_prediction(self, calibrated_members):
        member = calibrated_members.ensemble.member(0).probs
        _, counts = np.unique(member, axis=0, return_counts=True)
        assert set(counts.tolist()) == {2}

    def test_ensemble_is_less_confident(self, calibrated_members):
        combined = combine(calibrated_members.ensemble, CombinationWeights.uniform(10))
        _, top = global_gaps(combined, targets=calibrated_members.truth)
        assert top < 0


class TestBinnedPredictions:

    def test_exact_value_ace_is_zero(self):
        labels = balanced_labels(1000, 4, seed=5)
        preds = gen_binned_predictions(labels, SynthesisConfig(bin_size=2, n_classes=4, seed=5))
        assert ace(preds, BinningScheme.exact()) == 0.0
        assert np.all(preds.probs.sum(axis=1) == 1.0)
        assert set(np.unique(preds.probs).tolist()) <= {0.0, 0.5, 1.0}

    def test_bin_type_frequencies(self):
        labels = balanced_labels(100000, 4, seed=6)
        preds = gen_binned_predictions(labels, SynthesisConfig(bin_size=2, n_classes=4, seed=6))
        freqs = bin_type_frequencies(preds, class_index=0)
        assert freqs[1.0] == pytest.approx(1 / 16, abs=0.01)
        assert freqs[0.5] == pytest.approx(6 / 16, abs=0.01)
        assert freqs[0.0] == pytest.approx(9 / 16, abs=0.01)

    def test_balanced_labels(self):
        labels = balanced_labels(12, 4)
        assert np.bincount(labels).tolist() == [3, 3, 3, 3]
        assert class_count_warning(labels, 4) is None

    def test_unequal_counts_warn(self):
        assert "unequal class counts" in class_count_warning(np.array([0, 0, 1]), 2)


class TestDistributionErrors:

    def test_perfect_model(self):
        model = PiecewiseDistributionModel([0.5, 0.5], [[0.7, 0.3], [0.2, 0.8]], [[0.7, 0.3], [0.2, 0.8]])
        assert dist_calibration_errors(model).to_dict() == {"ace": 0.0, "acce": 0.0, "ece": 0.0, "ecce": 0.0}

    def test_population_ace(self):
        errors = dist_calibration_errors(example3_population_model())
        assert errors.ace == pytest.approx(9 / 32, abs=1e-15)

    def test_example1_unperturbed(self):
        errors = dist_calibration_errors(example1_model(0.0))
        assert errors.ace == 0.0 and errors.ece == 0.0

    def test_example1_all_label_but_not_top_label(self):
        tau = 0.05
        model = example1_model(tau)
        errors = dist_calibration_errors(model)
        assert errors.ace == pytest.approx(0.0, abs=1e-15)
        assert region_gaps(model, top_label=True)[(0.4, 1)] == pytest.approx(-tau / 3, abs=1e-15)
        assert errors.ece == pytest.approx(tau / 3, abs=1e-15)

    @pytest.mark.parametrize("tau", [-0.01, 0.06])
    def test_example1_tau_range(self, tau):
        with pytest.raises(InvalidParameterError):
            example1_model(tau)

    def test_masses_must_sum_to_one(self):
        with pytest.raises(InvalidParameterError):
            PiecewiseDistributionModel([0.5, 0.6], [[0.5, 0.5]] * 2, [[0.5, 0.5]] * 2)

    def test_sampling_follows_region_masses(self):
        model = example1_model(0.05)
        data = sample_distribution_model(model, SynthesisConfig(n_classes=4, members=1, samples=30000, seed=8))
        preds = data.ensemble.member(0).probs
        region = np.array([int(np.argmax(np.all(model.predicted_posteriors == row, axis=1))) for row in preds[:300]])
        assert np.array_equal(data.truth[:300], model.true_posteriors[region])
        assert np.mean(preds[:, 0] == 0.5) == pytest.approx(1 / 3, abs=0.02)


class TestEpsilonSweep:

    def test_single_bin_endpoints(self, calibrated_members):
        rows = epsilon_sweep(calibrated_members.ensemble, [15, 10, 5, 2, 1])
        assert [r.bins for r in rows] == [15, 10, 5, 2, 1]
        coarsest = rows[-1]
        assert coarsest.ace <= 1e-10
        assert coarsest.ece > 0.01

    def test_members_and_exact_rows(self, calibrated_members):
        rows = epsilon_sweep(
            calibrated_members.ensemble, [1, 15], include_members=True, include_exact=True, targets=calibrated_members.truth
        )
        assert len(rows) == 3 * 11
        assert rows[0].bins == 15 and rows[0].source == "ensemble"
        exact_members = [r for r in rows if r.bins is None and r.source.startswith("member_")]
        assert len(exact_members) == 10
        assert all(r.ece <= 1e-10 for r in exact_members)
        assert rows[-1].as_list()[0] == "exact"

    def test_single_prediction_set(self, two_sample_preds):
        rows = epsilon_sweep(two_sample_preds, [2])
        assert rows[0].source == "predictions"
        assert rows[0].ece == pytest.approx(0.3)
