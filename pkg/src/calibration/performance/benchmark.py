import logging
import statistics
import threading
import time
from collections import deque
from contextlib import contextmanager
from typing import Any, Deque, Dict

logger = logging.getLogger(__name__)

# most recent timings kept per operation
MAX_SAMPLES = 10000


class PerformanceTracker:
    """Elapsed wall-clock milliseconds of the latest `max_samples` runs per named operation"""

    def __init__(self, max_samples: int = MAX_SAMPLES):
        self._lock = threading.Lock()
        self.max_samples = max_samples
        self.metrics: Dict[str, Deque[float]] = {}

    def record_metric(self, category: str, elapsed_ms: float) -> None:
        with self._lock:
            self.metrics.setdefault(category, deque(maxlen=self.max_samples)).append(elapsed_ms)

    def reset(self) -> None:
        with self._lock:
            self.metrics.clear()

    def get_summary(self) -> Dict[str, Any]:
        summary = {}
        with self._lock:
            snapshot = {k: sorted(v) for k, v in self.metrics.items()}
        for category, timings in snapshot.items():
            summary[category] = {
                "count": len(timings),
                "min_ms": timings[0],
                "max_ms": timings[-1],
                "mean_ms": statistics.mean(timings),
                "median_ms": statistics.median(timings),
                "p95_ms": timings[int(len(timings) * 0.95)] if len(timings) > 1 else timings[0],
            }
        return summary


perf_tracker = PerformanceTracker()


@contextmanager
def benchmark_operation(name: str):
    """Log and record how long the wrapped block takes"""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = (time.perf_counter() - start) * 1000
        perf_tracker.record_metric(name.split("[")[0], elapsed)
        logger.info(f"{name}: {elapsed:.1f} ms")
