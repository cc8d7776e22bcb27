from __future__ import annotations

import logging
import math
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from online_sampler.models.schemas import DEFAULT_SEED, GridKind, SequenceKind
from online_sampler.services.greedy_engine import GreedyRun
from online_sampler.services.metrics import bernoulli_p
from online_sampler.services.point_set import PointSetError, SortedPointSet, UnitPoint, insert

logger = logging.getLogger("online_sampler.baselines")

_FIXED_BITS = 128
_FIXED_ONE = 1 << _FIXED_BITS
# floor(({phi}) * 2^128) with {phi} = (sqrt(5) - 1) / 2
_PHI_FRAC_FIXED = (math.isqrt(5 << (2 * _FIXED_BITS)) - _FIXED_ONE) >> 1

TIE_RTOL = 1e-12

GREEDY_KINDS = (SequenceKind.ENERGY, SequenceKind.KRITZINGER, SequenceKind.BERNOULLI)


def _first_min(objective: np.ndarray) -> int:
    """Index of the first entry within a relative hair of the minimum."""
    best = float(np.min(objective))
    tol = TIE_RTOL * max(1.0, abs(best))
    return int(np.flatnonzero(objective <= best + tol)[0])


def van_der_corput(i: int) -> UnitPoint:
    if i < 1:
        raise PointSetError(f"van der Corput index must be >= 1, got {i}.")
    bits = i.bit_length()
    numerator = int(format(i, "b")[::-1], 2)
    return UnitPoint.from_fraction(numerator, 1 << bits)


def kronecker_golden(i: int) -> UnitPoint:
    if i < 1:
        raise PointSetError(f"Kronecker index must be >= 1, got {i}.")
    frac = (i * _PHI_FRAC_FIXED) & (_FIXED_ONE - 1)
    return UnitPoint(frac / _FIXED_ONE)


def _pieces(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.concatenate(([0.0], x)), np.concatenate((x, [1.0]))


def kritzinger_next(ps: SortedPointSet) -> UnitPoint:
    """Point minimising the L2 star discrepancy of the augmented set.

    With ``j`` existing points to the left, the scaled objective
    ``m*x^2 - (2j+1)*x + const_j`` (m = n+1) is a parabola, so each piece is
    minimised by clamping its vertex ``(2j+1)/(2m)``.
    """
    if ps.size == 0:
        raise PointSetError("kritzinger_next needs a non-empty point set.")
    x = ps.values
    n = x.size
    m = n + 1
    j = np.arange(n + 1, dtype=np.float64)
    lo, hi = _pieces(x)
    c = np.clip((2.0 * j + 1.0) / (2.0 * m), lo, hi)
    tail = np.concatenate((np.cumsum((1.0 - x)[::-1])[::-1], [0.0]))
    objective = m * c * c - m + 1.0 - c + 2.0 * (j * (1.0 - c) + tail)
    return UnitPoint(float(c[_first_min(objective)]))


def periodic_bernoulli_next(ps: SortedPointSet) -> UnitPoint:
    """Minimiser of sum_k p(x - x_k) over [0, 1]."""
    if ps.size == 0:
        raise PointSetError("periodic_bernoulli_next needs a non-empty point set.")
    x = ps.values
    n = x.size
    j = np.arange(n + 1, dtype=np.float64)
    lo, hi = _pieces(x)
    c = np.clip(x.mean() + j / n - 0.5, lo, hi)

    # Offsets e_k = -x_k left of the piece and 1 - x_k right of it.
    head = np.concatenate(([0.0], np.cumsum(x)))
    total = head[-1]
    total_sq = float(np.dot(x, x))
    right_count = n - j
    e1 = -total + right_count
    e2 = total_sq + right_count - 2.0 * (total - head)
    objective = n * c * c + 2.0 * c * e1 + e2 - (n * c + e1) + n / 6.0
    return UnitPoint(float(c[_first_min(objective)]))


def wagner_field(ps: SortedPointSet, x: Any) -> Union[float, np.ndarray]:
    """Sum of the sawtooth h(y) = 1/2 - {y} over y = x - x_i."""
    pts = ps.values
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.sum(0.5 - np.mod(xs[:, None] - pts[None, :], 1.0), axis=1)
    return out if np.ndim(x) else float(out[0])


def wagner_sup(ps: SortedPointSet) -> float:
    if ps.size == 0:
        raise PointSetError("wagner_sup needs a non-empty point set.")
    # Points at 1 act as points at 0 on the circle.
    y = np.sort(np.mod(ps.values, 1.0))
    n = y.size
    i = np.arange(1, n + 1, dtype=np.float64)
    shift = float(y.sum()) - n / 2.0
    delta = np.concatenate((i / n - y, (i - 1.0) / n - y, [0.0]))
    return float(np.max(np.abs(n * delta + shift)))


def sawtooth_product_integral(a: float, b: float) -> float:
    """Integral over [0, 1] of (1/2 - {x - a}) * (1/2 - {x - b})."""
    return float(bernoulli_p(a - b)) / 2.0


class SequenceGenerator:
    """Deterministic stream of points for one sequence kind.

    Greedy kinds emit their seed points first and then one greedy point per
    step; index kinds count from 1.
    """

    def __init__(
        self,
        kind: SequenceKind,
        seed_points: Optional[Sequence[float]] = None,
        grid: GridKind = GridKind.END,
    ) -> None:
        self.kind = SequenceKind(kind)
        self.grid = grid
        self._index = 0
        if self.kind in GREEDY_KINDS:
            seed = list(DEFAULT_SEED) if seed_points is None else [float(v) for v in seed_points]
            self._pending: List[float] = seed
            self._state = SortedPointSet.from_values(seed)
            self._run = GreedyRun(self._state, grid) if self.kind is SequenceKind.ENERGY else None
        else:
            if seed_points:
                raise PointSetError(f"seed points do not apply to the {self.kind.value} sequence.")
            self._pending = []

    def _next_greedy(self) -> float:
        if self._run is not None:
            return self._run.step().chosen.value
        step = kritzinger_next if self.kind is SequenceKind.KRITZINGER else periodic_bernoulli_next
        point = step(self._state)
        self._state = insert(self._state, point)
        return point.value

    def __iter__(self) -> "SequenceGenerator":
        return self

    def __next__(self) -> float:
        if self._pending:
            return self._pending.pop(0)
        if self.kind in GREEDY_KINDS:
            return self._next_greedy()
        self._index += 1
        if self.kind is SequenceKind.VDC:
            return van_der_corput(self._index).value
        return kronecker_golden(self._index).value

    def take(self, count: int) -> np.ndarray:
        if count < 0:
            raise PointSetError(f"count must be non-negative, got {count}.")
        out = np.empty(count)
        for k in range(count):
            out[k] = next(self)
        logger.debug("%s: emitted %d values", self.kind.value, count)
        return out
