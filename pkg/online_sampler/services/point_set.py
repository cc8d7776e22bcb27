from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from online_sampler.models.schemas import GridKind

Rational = Tuple[int, int]

RATIONAL_TOLERANCE = 2.0**-50
ORACLE_MAX_POINTS = 8


class PointSetError(ValueError):
    pass


def _check_rational(value: float, rational: Optional[Rational]) -> None:
    if rational is None:
        return
    num, den = rational
    if den <= 0 or num < 0 or num > den:
        raise PointSetError(f"Invalid rational annotation {num}/{den}: need 0 <= num <= den, den > 0.")
    if abs(value - num / den) > RATIONAL_TOLERANCE:
        raise PointSetError(f"Rational annotation {num}/{den} does not match value {value!r}.")


@dataclass(frozen=True)
class UnitPoint:
    value: float
    rational: Optional[Rational] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 1.0):
            raise PointSetError(f"Point {self.value!r} lies outside [0, 1].")
        _check_rational(self.value, self.rational)

    @classmethod
    def from_fraction(cls, num: int, den: int) -> "UnitPoint":
        return cls(num / den, (num, den))


class SortedPointSet:
    """Immutable multiset of points in [0, 1], kept in non-decreasing order.

    Float values are the source of truth for ordering; the optional rational
    annotations ride along with their points.
    """

    __slots__ = ("_values", "_rationals")

    def __init__(self, values: np.ndarray, rationals: Sequence[Optional[Rational]]) -> None:
        # Trusted constructor: callers guarantee order and validity.
        values = np.asarray(values, dtype=np.float64)
        values.setflags(write=False)
        self._values = values
        self._rationals: Tuple[Optional[Rational], ...] = tuple(rationals)

    @classmethod
    def empty(cls) -> "SortedPointSet":
        return cls(np.empty(0), ())

    @classmethod
    def from_values(
        cls,
        values: Iterable[float],
        rationals: Optional[Sequence[Optional[Rational]]] = None,
    ) -> "SortedPointSet":
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            bad = arr[~((arr >= 0.0) & (arr <= 1.0))]
            raise PointSetError(f"Point {float(bad[0])!r} lies outside [0, 1].")
        rats: List[Optional[Rational]] = list(rationals) if rationals is not None else [None] * arr.size
        if len(rats) != arr.size:
            raise PointSetError("rationals must have the same length as values.")
        for v, r in zip(arr.tolist(), rats):
            _check_rational(v, r)
        order = np.argsort(arr, kind="stable")
        return cls(arr[order], [rats[i] for i in order.tolist()])

    @classmethod
    def from_points(cls, points: Iterable[UnitPoint]) -> "SortedPointSet":
        pts = list(points)
        return cls.from_values([p.value for p in pts], [p.rational for p in pts])

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def rationals(self) -> Tuple[Optional[Rational], ...]:
        return self._rationals

    @property
    def size(self) -> int:
        return int(self._values.size)

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> UnitPoint:
        return UnitPoint(float(self._values[index]), self._rationals[index])

    def __iter__(self) -> Iterator[UnitPoint]:
        for v, r in zip(self._values.tolist(), self._rationals):
            yield UnitPoint(v, r)

    def __repr__(self) -> str:
        head = ", ".join(f"{v:.6g}" for v in self._values[:6].tolist())
        more = ", ..." if self.size > 6 else ""
        return f"SortedPointSet(n={self.size}, [{head}{more}])"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SortedPointSet):
            return NotImplemented
        return np.array_equal(self._values, other._values) and self._rationals == other._rationals

    __hash__ = None  # type: ignore[assignment]


class SortedBuffer:
    """Exclusively-owned, growable sorted storage for streaming insertions."""

    def __init__(self, ps: Optional[SortedPointSet] = None) -> None:
        ps = ps if ps is not None else SortedPointSet.empty()
        self._size = ps.size
        self._buf = np.empty(max(16, 2 * ps.size))
        self._buf[: self._size] = ps.values
        self._rationals: List[Optional[Rational]] = list(ps.rationals)

    @property
    def size(self) -> int:
        return self._size

    @property
    def values(self) -> np.ndarray:
        view = self._buf[: self._size]
        view.flags.writeable = False
        return view

    @property
    def rationals(self) -> List[Optional[Rational]]:
        return self._rationals

    def add(self, value: float, rational: Optional[Rational] = None) -> int:
        if not (0.0 <= value <= 1.0):
            raise PointSetError(f"Point {value!r} lies outside [0, 1].")
        n = self._size
        if n == self._buf.size:
            grown = np.empty(2 * self._buf.size)
            grown[:n] = self._buf[:n]
            self._buf = grown
        k = int(np.searchsorted(self._buf[:n], value, side="right"))
        self._buf[k + 1 : n + 1] = self._buf[k:n]
        self._buf[k] = value
        self._rationals.insert(k, rational)
        self._size = n + 1
        return k

    def snapshot(self) -> SortedPointSet:
        return SortedPointSet(self._buf[: self._size].copy(), self._rationals)


@dataclass(frozen=True)
class TargetGrid:
    kind: GridKind
    n: int

    def targets(self) -> np.ndarray:
        i = np.arange(1, self.n + 1, dtype=np.float64)
        if self.kind is GridKind.END:
            return i / self.n
        return (2.0 * i - 1.0) / (2.0 * self.n)

    def target(self, i: int) -> float:
        """Target of 1-indexed slot ``i``."""
        if self.kind is GridKind.END:
            return i / self.n
        return (2 * i - 1) / (2 * self.n)


def energy(ps: SortedPointSet, grid: TargetGrid) -> float:
    if ps.size == 0:
        raise PointSetError("energy of an empty point set is undefined.")
    if grid.n != ps.size:
        raise PointSetError(f"grid size {grid.n} does not match point set size {ps.size}.")
    terms = np.abs(ps.values - grid.targets())
    return math.fsum(terms.tolist())


def energy_permutation_oracle(points: Sequence[UnitPoint], grid: TargetGrid) -> float:
    """Minimum of the slot-matched energy over every ordering of ``points``."""
    if len(points) > ORACLE_MAX_POINTS:
        raise PointSetError(
            f"permutation oracle refused for {len(points)} points (limit {ORACLE_MAX_POINTS})."
        )
    if grid.n != len(points):
        raise PointSetError(f"grid size {grid.n} does not match {len(points)} points.")
    targets = grid.targets().tolist()
    values = [p.value for p in points]
    return min(
        math.fsum(abs(values[j] - t) for j, t in zip(perm, targets))
        for perm in itertools.permutations(range(len(values)))
    )


def insert(ps: SortedPointSet, p: UnitPoint) -> SortedPointSet:
    if not (0.0 <= p.value <= 1.0):
        raise PointSetError(f"Point {p.value!r} lies outside [0, 1].")
    k = int(np.searchsorted(ps.values, p.value, side="right"))
    values = np.insert(ps.values, k, p.value)
    rationals = list(ps.rationals)
    rationals.insert(k, p.rational)
    return SortedPointSet(values, rationals)
