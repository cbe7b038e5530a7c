import numpy as np
import pytest
from scipy.spatial.distance import pdist

from src.calibration.core.errors import InvalidParameterError
from src.calibration.core.predictions import LabeledPredictionSet
from src.calibration.metrics.kernel import median_bandwidth, skce_details, skce_uq, stride_subsample


class TestSkceValues:

    def test_two_sample_hand_value(self):
        preds = LabeledPredictionSet([[0.5, 0.5], [0.5, 0.5]], [0, 1])
        assert skce_uq(preds) == pytest.approx(-0.5, abs=1e-15)

    def test_two_sample_skewed(self, two_sample_preds):
        assert skce_uq(two_sample_preds, bandwidth=1.0) == pytest.approx(-0.32, abs=1e-15)

    def test_miscalibrated_is_positive(self, rng):
        labels = rng.integers(0, 2, size=1000)
        preds = LabeledPredictionSet(np.tile([0.9, 0.1], (1000, 1)), labels)
        assert skce_uq(preds) > 0.0

    def test_unbiased_when_labels_follow_predictions(self, simplex_rows):
        values = []
        for seed in range(200):
            gen = np.random.default_rng(seed)
            probs = simplex_rows(200, 3)
            labels = np.array([gen.choice(3, p=row) for row in probs])
            values.append(skce_uq(LabeledPredictionSet(probs, labels), bandwidth=1.0))
        values = np.array(values)
        standard_error = values.std(ddof=1) / np.sqrt(len(values))
        assert abs(values.mean()) < 2 * standard_error

    def test_permutation_symmetry(self, simplex_rows, rng):
        probs = simplex_rows(300, 4)
        labels = rng.integers(0, 4, size=300)
        order = rng.permutation(300)
        a = skce_uq(LabeledPredictionSet(probs, labels), bandwidth=0.7)
        b = skce_uq(LabeledPredictionSet(probs[order], labels[order]), bandwidth=0.7)
        assert abs(a - b) <= 1e-12

    def test_block_size_does_not_change_value(self, simplex_rows, rng):
        preds = LabeledPredictionSet(simplex_rows(100, 3), rng.integers(0, 3, size=100))
        a = skce_details(preds, bandwidth=0.5, block_rows=7).value
        b = skce_details(preds, bandwidth=0.5, block_rows=256).value
        assert abs(a - b) <= 1e-12


class TestSkceParameters:

    def test_single_sample_rejected(self):
        with pytest.raises(InvalidParameterError):
            skce_uq(LabeledPredictionSet([[0.5, 0.5]], [0]))

    @pytest.mark.parametrize("bandwidth", [0.0, -1.0])
    def test_non_positive_bandwidth(self, two_sample_preds, bandwidth):
        with pytest.raises(InvalidParameterError):
            skce_uq(two_sample_preds, bandwidth=bandwidth)

    def test_median_bandwidth(self):
        assert median_bandwidth(np.array([[0.5, 0.5], [1.0, 0.0]])) == pytest.approx(1.0)

    def test_zero_median_falls_back(self, two_sample_preds):
        result = skce_details(two_sample_preds)
        assert result.bandwidth == 1.0

    def test_subsample_flag(self, simplex_rows, rng):
        preds = LabeledPredictionSet(simplex_rows(120, 3), rng.integers(0, 3, size=120))
        result = skce_details(preds, bandwidth=1.0, max_rows=50)
        assert result.subsampled
        assert result.rows_used == 50
        assert not skce_details(preds, bandwidth=1.0).subsampled

    def test_stride_subsample(self):
        assert stride_subsample(5, 10).tolist() == [0, 1, 2, 3, 4]
        assert stride_subsample(10, 4).tolist() == [0, 2, 5, 7]

    @pytest.mark.parametrize("n,limit", [(1001, 1000), (10001, 10000), (12000, 2000), (1999, 1000)])
    def test_stride_subsample_keeps_limit_rows(self, n, limit):
        rows = stride_subsample(n, limit)
        assert len(rows) == limit
        assert len(np.unique(rows)) == limit
        assert rows[0] == 0 and rows[-1] < n

    def test_bandwidth_uses_a_full_sample(self, simplex_rows):
        probs = simplex_rows(1001, 3)
        expected = float(np.median(pdist(probs[(np.arange(1000) * 1001) // 1000], metric="cityblock")))
        assert median_bandwidth(probs, sample=1000) == pytest.approx(expected, abs=1e-15)
