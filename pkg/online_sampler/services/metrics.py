from __future__ import annotations

import math
from typing import Any, Iterable, Literal

import numpy as np

from online_sampler.models.schemas import ALL_METRICS, DiscrepancyReport, MetricName
from online_sampler.services.point_set import PointSetError, SortedPointSet


def _values(ps: SortedPointSet, metric: str) -> np.ndarray:
    if ps.size == 0:
        raise PointSetError(f"{metric} of an empty point set is undefined.")
    return ps.values


def bernoulli_p(x: Any) -> np.ndarray:
    """1-periodic second Bernoulli polynomial {x}^2 - {x} + 1/6."""
    frac = np.mod(np.asarray(x, dtype=np.float64), 1.0)
    return frac * frac - frac + 1.0 / 6.0


def star_discrepancy(ps: SortedPointSet) -> float:
    x = _values(ps, "star discrepancy")
    n = x.size
    i = np.arange(1, n + 1, dtype=np.float64)
    return 1.0 / (2 * n) + float(np.max(np.abs(x - (2.0 * i - 1.0) / (2 * n))))


def extreme_discrepancy(ps: SortedPointSet) -> float:
    x = _values(ps, "extreme discrepancy")
    n = x.size
    i = np.arange(1, n + 1, dtype=np.float64)
    over = max(float(np.max(i / n - x)), 0.0)
    under = max(float(np.max(x - (i - 1.0) / n)), 0.0)
    return over + under


def _abs_integral(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Integral of |x - c| over [a, b] from the antiderivative (x - c)|x - c| / 2.
    return (np.abs(b - c) * (b - c) - np.abs(a - c) * (a - c)) / 2.0


def l1_star_discrepancy(ps: SortedPointSet) -> float:
    """Exact W1 distance between the empirical measure and Lebesgue on [0, 1]."""
    x = _values(ps, "L1 star discrepancy")
    n = x.size
    edges = np.concatenate(([0.0], x, [1.0]))
    levels = np.arange(n + 1, dtype=np.float64) / n
    pieces = _abs_integral(edges[:-1], edges[1:], levels)
    return math.fsum(pieces.tolist())


def l2_star_discrepancy(ps: SortedPointSet) -> float:
    """Square root of the integral of (F - x)^2, via Warnock's formula."""
    x = _values(ps, "L2 star discrepancy")
    n = x.size
    i = np.arange(1, n + 1, dtype=np.float64)
    dev = x - (2.0 * i - 1.0) / (2 * n)
    squared = 1.0 / (12.0 * n * n) + math.fsum((dev * dev).tolist()) / n
    return math.sqrt(squared)


def periodic_l2_discrepancy(
    ps: SortedPointSet,
    method: Literal["sorted", "direct"] = "sorted",
) -> float:
    x = _values(ps, "periodic L2 discrepancy")
    n = x.size
    if method == "direct":
        diffs = x[:, None] - x[None, :]
        return math.fsum(bernoulli_p(diffs).ravel().tolist()) / (n * n)
    if method != "sorted":
        raise PointSetError(f"Unknown periodic L2 method {method!r}.")
    # p is even and equals u^2 - u + 1/6 for u = |x_i - x_j| in [0, 1].
    k = np.arange(1, n + 1, dtype=np.float64)
    sum_sq = 2.0 * n * math.fsum((x * x).tolist()) - 2.0 * math.fsum(x.tolist()) ** 2
    sum_abs = 2.0 * math.fsum((x * (2.0 * k - n - 1.0)).tolist())
    return (sum_sq - sum_abs) / (n * n) + 1.0 / 6.0


_METRIC_FUNCS = {
    "star": star_discrepancy,
    "extreme": extreme_discrepancy,
    "l1_star": l1_star_discrepancy,
    "periodic_l2": periodic_l2_discrepancy,
}


def discrepancy_report(
    ps: SortedPointSet,
    metrics: Iterable[MetricName] = ALL_METRICS,
) -> DiscrepancyReport:
    n = ps.size
    if n == 0:
        raise PointSetError("discrepancy report of an empty point set is undefined.")
    values = {name: _METRIC_FUNCS[name](ps) for name in metrics}
    if n >= 2:
        log_n = math.log(n)
        if "star" in values:
            values["scaled_star"] = n * values["star"] / log_n
        if "extreme" in values:
            values["scaled_extreme"] = n * values["extreme"] / log_n
    return DiscrepancyReport(n=n, **values)
