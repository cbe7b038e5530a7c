import time

import numpy as np
import pytest

from src.calibration.core.binning import BinningScheme
from src.calibration.core.predictions import LabeledPredictionSet
from src.calibration.metrics.calibration_errors import ace, ece
from src.calibration.metrics.kernel import skce_details
from src.calibration.performance.benchmark import MAX_SAMPLES, PerformanceTracker, benchmark_operation, perf_tracker
from src.calibration.scaling.fitting import fit_temperature
from src.calibration.synthlab.generators import SynthesisConfig, gen_scaled_logits


class TestPerformanceTracker:

    def test_summary_statistics(self):
        tracker = PerformanceTracker()
        for value in [4.0, 1.0, 3.0, 2.0]:
            tracker.record_metric("op", value)
        summary = tracker.get_summary()["op"]
        assert summary["count"] == 4
        assert summary["min_ms"] == 1.0 and summary["max_ms"] == 4.0
        assert summary["mean_ms"] == 2.5
        assert summary["median_ms"] == 2.5

    def test_history_is_capped(self):
        tracker = PerformanceTracker(max_samples=100)
        for value in range(250):
            tracker.record_metric("op", float(value))
        summary = tracker.get_summary()["op"]
        assert summary["count"] == 100
        assert summary["min_ms"] == 150.0 and summary["max_ms"] == 249.0

    def test_default_cap(self):
        tracker = PerformanceTracker()
        for _ in range(MAX_SAMPLES + 5):
            tracker.record_metric("op", 1.0)
        assert tracker.get_summary()["op"]["count"] == MAX_SAMPLES

    def test_reset(self):
        tracker = PerformanceTracker()
        tracker.record_metric("op", 1.0)
        tracker.reset()
        assert tracker.get_summary() == {}

    def test_benchmark_operation_records_base_name(self):
        perf_tracker.reset()
        with benchmark_operation("unit[variant]"):
            pass
        assert perf_tracker.get_summary()["unit"]["count"] == 1

    def test_records_even_when_block_raises(self):
        perf_tracker.reset()
        with pytest.raises(RuntimeError):
            with benchmark_operation("failing"):
                raise RuntimeError("boom")
        assert "failing" in perf_tracker.get_summary()


class TestThroughput:

    def test_metrics_on_large_input(self, rng):
        """Binned metrics stay well below a second at N=10^5, K=10"""
        draws = rng.standard_exponential((100000, 10))
        preds = LabeledPredictionSet(draws / draws.sum(axis=1, keepdims=True), rng.integers(0, 10, size=100000))
        start = time.perf_counter()
        ace(preds, BinningScheme.fixed(15))
        ece(preds, BinningScheme.fixed(15))
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"Metrics too slow: {elapsed:.2f}s"
        print(f"ACE + ECE at N=1e5: {elapsed * 1000:.1f} ms")

    def test_temperature_fit(self):
        logits = gen_scaled_logits(SynthesisConfig(n_classes=10, samples=20000, seed=1), scale=2.0)
        start = time.perf_counter()
        fit_temperature(logits)
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"Fit too slow: {elapsed:.2f}s"
        print(f"Temperature fit at N=2e4: {elapsed:.2f}s")

    def test_skce_is_capped(self, rng):
        draws = rng.standard_exponential((12000, 4))
        preds = LabeledPredictionSet(draws / draws.sum(axis=1, keepdims=True), rng.integers(0, 4, size=12000))
        result = skce_details(preds, bandwidth=1.0, max_rows=2000)
        assert result.rows_used == 2000
        assert np.isfinite(result.value)
