from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, List, Tuple, Union

import numpy as np

from online_sampler.services.point_set import SortedPointSet, UnitPoint

TIE_RTOL = 1e-12


class HeuristicsError(ValueError):
    pass


def _require_points(ps: SortedPointSet) -> np.ndarray:
    if ps.size == 0:
        raise HeuristicsError("the discrepancy function of an empty point set is undefined.")
    return ps.values


def _check_unit(x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise HeuristicsError(f"x={x!r} lies outside [0, 1].")


class DiscrepancyFunction:
    """Delta(x) = #{x_i <= x}/n - x as a list of jump breakpoints."""

    def __init__(self, ps: SortedPointSet) -> None:
        self.ps = ps
        self._x = _require_points(ps)

    @property
    def n(self) -> int:
        return int(self._x.size)

    @property
    def breakpoints(self) -> List[Tuple[float, float, float]]:
        """(abscissa, left limit, value) per distinct point."""
        uniq = np.unique(self._x)
        below = np.searchsorted(self._x, uniq, side="left")
        upto = np.searchsorted(self._x, uniq, side="right")
        n = self.n
        return [
            (float(u), float(lo / n - u), float(hi / n - u))
            for u, lo, hi in zip(uniq, below, upto)
        ]

    def __call__(self, x: Any) -> Union[float, np.ndarray]:
        xs = np.asarray(x, dtype=np.float64)
        out = np.searchsorted(self._x, xs, side="right") / self.n - xs
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SawtoothFamily:
    x: float

    def __post_init__(self) -> None:
        _check_unit(self.x)

    def __call__(self, y: Any) -> Union[float, np.ndarray]:
        ys = np.asarray(y, dtype=np.float64)
        out = ys - (ys > self.x)
        return float(out) if out.ndim == 0 else out


def delta_at(ps: SortedPointSet, x: float) -> float:
    values = _require_points(ps)
    _check_unit(x)
    return int(np.searchsorted(values, x, side="right")) / values.size - x


@dataclass(frozen=True)
class _SignPieces:
    """Delta = level - y on [start, end]; the crossing is clipped into the piece."""

    start: np.ndarray
    end: np.ndarray
    level: np.ndarray
    crossing: np.ndarray
    running: np.ndarray  # running integral of sign(Delta) at each piece start


def _sign_pieces(values: np.ndarray) -> _SignPieces:
    n = values.size
    edges = np.concatenate(([0.0], values, [1.0]))
    start, end = edges[:-1], edges[1:]
    level = np.arange(n + 1, dtype=np.float64) / n
    crossing = np.clip(level, start, end)
    pieces = 2.0 * crossing - start - end
    running = np.concatenate(([0.0], np.cumsum(pieces)))
    return _SignPieces(start, end, level, crossing, running)


def running_sign_integral(ps: SortedPointSet, x: float) -> float:
    """Exact value of the integral of sign(Delta(y)) over [0, x]."""
    values = _require_points(ps)
    _check_unit(x)
    pieces = _sign_pieces(values)
    k = int(np.searchsorted(values, x, side="right"))
    a = pieces.start[k]
    return float(pieces.running[k] + 2.0 * min(max(pieces.level[k], a), x) - a - x)


def heuristic_objective(ps: SortedPointSet, x: float) -> float:
    """Integral of sign(Delta(y)) * h_x(y) over [0, 1]."""
    values = _require_points(ps)
    _check_unit(x)
    pieces = _sign_pieces(values)
    c, a, b = pieces.crossing, pieces.start, pieces.end
    first_moment = math.fsum((c * c - (a * a + b * b) / 2.0).tolist())
    total = float(pieces.running[-1])
    return first_moment - (total - running_sign_integral(ps, x))


@dataclass(frozen=True)
class Prediction:
    x: float
    value: float
    degenerate: bool = False

    @property
    def point(self) -> UnitPoint:
        return UnitPoint(self.x)


def predict_next(ps: SortedPointSet) -> Prediction:
    """First-order guess for the next greedy point.

    h_x(y) = y - 1{y > x}, so the objective is a constant plus the running
    integral of sign(Delta); its maximiser is found piece by piece.
    """
    values = _require_points(ps)
    pieces = _sign_pieces(values)
    peaks = pieces.running[:-1] + (pieces.crossing - pieces.start)
    candidates = np.concatenate((peaks, pieces.running))
    if np.ptp(candidates) == 0.0:
        return Prediction(x=1.0, value=0.0, degenerate=True)
    best = float(np.max(peaks))
    k = int(np.flatnonzero(peaks >= best - TIE_RTOL * max(1.0, abs(best)))[0])
    return Prediction(x=float(pieces.crossing[k]), value=float(peaks[k]))
