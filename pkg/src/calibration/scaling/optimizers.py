import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..core.parallel import ordered_map

logger = logging.getLogger(__name__)

PHI_RATIO = (math.sqrt(5) - 1) / 2


@dataclass
class SearchResult:
    argmin: float
    minimum: float
    evaluations: int


def _closer_to_one(a: float, b: float) -> bool:
    return abs(math.log(a)) < abs(math.log(b))


def golden_section(f: Callable[[float], float], lower: float, upper: float, tol: float = 1e-4) -> SearchResult:
    """Golden-section search on [lower, upper]; returns the best point evaluated"""
    x1 = upper - PHI_RATIO * (upper - lower)
    x2 = lower + PHI_RATIO * (upper - lower)
    f1, f2 = f(x1), f(x2)
    evaluations = 2
    best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)

    while abs(upper - lower) > tol:
        if f2 > f1:
            upper, x2, f2 = x2, x1, f1
            x1 = upper - PHI_RATIO * (upper - lower)
            f1 = f(x1)
            candidate = (x1, f1)
        else:
            lower, x1, f1 = x1, x2, f2
            x2 = lower + PHI_RATIO * (upper - lower)
            f2 = f(x2)
            candidate = (x2, f2)
        evaluations += 1
        if candidate[1] < best_f or (candidate[1] == best_f and _closer_to_one(candidate[0], best_x)):
            best_x, best_f = candidate
    return SearchResult(best_x, best_f, evaluations)


def temperature_grid(t_min: float, t_max: float, size: int) -> np.ndarray:
    """Log-spaced grid that always contains t = 1"""
    return np.unique(np.append(np.geomspace(t_min, t_max, size), 1.0))


def _keep_better(result: SearchResult, t: float, value: float) -> None:
    if value < result.minimum or (value == result.minimum and _closer_to_one(t, result.argmin)):
        result.argmin, result.minimum = float(t), float(value)


def _best_index(points: np.ndarray, values: np.ndarray) -> int:
    return int(np.lexsort((np.abs(np.log(points)), values))[0])


def _lattice_window(grid: np.ndarray, lattice: np.ndarray, centers: Sequence[int]) -> np.ndarray:
    """Lattice indices lying inside the coarse brackets around each center"""
    mask = np.zeros(len(lattice), dtype=bool)
    for i in centers:
        lower = grid[max(i - 1, 0)]
        upper = grid[min(i + 1, len(grid) - 1)]
        mask[np.searchsorted(lattice, lower, side="left"):np.searchsorted(lattice, upper, side="right")] = True
    return np.flatnonzero(mask)


def grid_refine(
    objective: Callable[[float], float],
    t_min: float,
    t_max: float,
    grid_size: int = 200,
    tol: float = 1e-7,
    resolution: Optional[int] = None,
    candidates: int = 8,
) -> SearchResult:
    """Scan a log grid, then refine where the objective is lowest.

    With `resolution` set, every point of the
    `geomspace(t_min, t_max, resolution)` lattice that falls inside the
    brackets of the `candidates` best grid points is evaluated, and the best
    lattice point is golden-polished. Ties go to the temperature closest to 1.
    """
    grid = temperature_grid(t_min, t_max, grid_size)
    values = np.asarray(ordered_map(objective, grid))
    best = _best_index(grid, values)
    result = SearchResult(float(grid[best]), float(values[best]), len(grid))

    lower = grid[max(best - 1, 0)]
    upper = grid[min(best + 1, len(grid) - 1)]
    if upper - lower > tol:
        refined = golden_section(objective, lower, upper, tol)
        result.evaluations += refined.evaluations
        _keep_better(result, refined.argmin, refined.minimum)

    if resolution:
        lattice = np.geomspace(t_min, t_max, resolution)
        centers = np.lexsort((np.abs(np.log(grid)), values))[:candidates]
        window = lattice[_lattice_window(grid, lattice, centers)]
        if len(window) == 0:
            return result
        window_values = np.asarray(ordered_map(objective, window))
        result.evaluations += len(window)
        j = _best_index(window, window_values)
        _keep_better(result, window[j], window_values[j])

        lower = window[max(j - 1, 0)]
        upper = window[min(j + 1, len(window) - 1)]
        if upper - lower > tol:
            polished = golden_section(objective, lower, upper, tol)
            result.evaluations += polished.evaluations
            _keep_better(result, polished.argmin, polished.minimum)

    logger.debug(f"grid_refine: t={result.argmin:.8f} objective={result.minimum:.10f} ({result.evaluations} evals)")
    return result


def projected_descent(
    objective: Callable[[float], float],
    gradient: Callable[[float], float],
    start: float,
    learning_rate: float,
    iterations: int,
    bounds: Tuple[float, float],
) -> SearchResult:
    """Fixed-step (sub)gradient descent clipped to `bounds`; returns the best iterate"""
    t = start
    best = SearchResult(t, objective(t), 1)
    for step in range(iterations):
        t = float(np.clip(t - learning_rate * gradient(t), *bounds))
        value = objective(t)
        best.evaluations += 1
        if value < best.minimum:
            best.argmin, best.minimum = t, value
        if step % 50 == 0:
            logger.debug(f"descent step {step}: t={t:.6f} objective={value:.8f}")
    return best
