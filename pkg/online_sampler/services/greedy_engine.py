from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from online_sampler.models.schemas import GridKind
from online_sampler.services.point_set import (
    PointSetError,
    Rational,
    SortedBuffer,
    SortedPointSet,
    TargetGrid,
    UnitPoint,
    energy,
)

logger = logging.getLogger("online_sampler.greedy_engine")

AVERAGE_ENERGY_FLOOR = 1.0 / 8.0
FLOOR_SLACK = 1e-12


def progress_every() -> int:
    return int(os.getenv("ONLINE_SAMPLER_PROGRESS_EVERY", "10000"))


@dataclass(frozen=True)
class GreedyStepResult:
    chosen: UnitPoint
    slot: int
    new_energy: float
    candidate_energies: Optional[np.ndarray] = None


@dataclass
class EnergyTrace:
    start_size: int
    n: np.ndarray
    chosen: np.ndarray
    energy: np.ndarray
    rationals: List[Optional[Rational]] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.n.size)

    @property
    def entries(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.n.tolist(), self.chosen.tolist(), self.energy.tolist()))


@dataclass(frozen=True)
class _Scan:
    index: int
    value: float
    rational: Optional[Rational]
    energy: float
    sums: np.ndarray


def _scan_end(x: np.ndarray) -> _Scan:
    n = x.size
    m = n + 1
    if n == 0:
        return _Scan(0, 1.0, (1, 1), 0.0, np.zeros(1))
    i = np.arange(1, n + 1, dtype=np.float64)
    upper = np.abs(x - (i + 1.0) / m)
    # Slot 0 puts every existing point one target to the right.
    s0 = math.fsum(upper.tolist())
    d = np.abs(x - i / m) - upper
    sums = np.empty(n + 1)
    sums[0] = s0
    sums[1:] = s0 + np.cumsum(d)
    j = int(np.argmin(sums))
    return _Scan(j, (j + 1) / m, (j + 1, m), float(sums[j]), sums)


def _scan_centered(x: np.ndarray, rationals: List[Optional[Rational]]) -> _Scan:
    n = x.size
    m2 = 2 * (n + 1)
    i = np.arange(1, n + 1, dtype=np.float64)
    upper = np.abs(x - (2.0 * i + 1.0) / m2)
    s0 = math.fsum(upper.tolist())
    base = np.empty(n + 1)
    base[0] = s0
    base[1:] = s0 + np.cumsum(np.abs(x - (2.0 * i - 1.0) / m2) - upper)

    j_all = np.arange(n + 1, dtype=np.float64)
    t = (2.0 * j_all + 1.0) / m2
    lo = np.concatenate(([0.0], x))
    hi = np.concatenate((x, [1.0]))
    c = np.clip(t, lo, hi)
    sums = base + np.abs(c - t)
    j = int(np.argmin(sums))

    value = float(c[j])
    if value == t[j]:
        rational: Optional[Rational] = (2 * j + 1, m2)
    elif value == lo[j]:
        rational = rationals[j - 1] if j > 0 else (0, 1)
    else:
        rational = rationals[j] if j < n else (1, 1)
    return _Scan(j, value, rational, float(sums[j]), sums)


def _scan(x: np.ndarray, rationals: List[Optional[Rational]], grid_kind: GridKind) -> _Scan:
    if grid_kind is GridKind.END:
        return _scan_end(x)
    return _scan_centered(x, rationals)


def next_point(
    ps: SortedPointSet,
    grid_kind: GridKind = GridKind.END,
    *,
    diagnostics: bool = False,
) -> GreedyStepResult:
    """Global minimiser of the augmented-set energy, found by one O(n) sweep."""
    scan = _scan(ps.values, list(ps.rationals), grid_kind)
    slot = int(np.searchsorted(ps.values, scan.value, side="right"))
    return GreedyStepResult(
        chosen=UnitPoint(scan.value, scan.rational),
        slot=slot,
        new_energy=scan.energy,
        candidate_energies=scan.sums.copy() if diagnostics else None,
    )


class GreedyRun:
    """Exclusively-owned greedy state that appends points in place."""

    def __init__(self, ps: SortedPointSet, grid_kind: GridKind = GridKind.END) -> None:
        self.grid_kind = grid_kind
        self._buffer = SortedBuffer(ps)

    @property
    def size(self) -> int:
        return self._buffer.size

    @property
    def values(self) -> np.ndarray:
        return self._buffer.values

    def snapshot(self) -> SortedPointSet:
        return self._buffer.snapshot()

    def step(self) -> GreedyStepResult:
        scan = _scan(self._buffer.values, self._buffer.rationals, self.grid_kind)
        slot = self._buffer.add(scan.value, scan.rational)
        return GreedyStepResult(UnitPoint(scan.value, scan.rational), slot, scan.energy)

    def run(self, count: int) -> EnergyTrace:
        if count < 1:
            raise PointSetError(f"count must be positive, got {count}.")
        start = self.size
        chosen = np.empty(count)
        energies = np.empty(count)
        rationals: List[Optional[Rational]] = []
        every = progress_every()
        for step_idx in range(count):
            result = self.step()
            chosen[step_idx] = result.chosen.value
            energies[step_idx] = result.new_energy
            rationals.append(result.chosen.rational)
            if every and (step_idx + 1) % every == 0:
                logger.info(
                    "greedy %s: %d/%d steps, n=%d, energy=%.6f",
                    self.grid_kind.value,
                    step_idx + 1,
                    count,
                    self.size,
                    result.new_energy,
                )
        sizes = np.arange(start + 1, start + count + 1)
        return EnergyTrace(start_size=start, n=sizes, chosen=chosen, energy=energies, rationals=rationals)


def extend(
    ps: SortedPointSet,
    count: int,
    grid_kind: GridKind = GridKind.END,
) -> Tuple[SortedPointSet, EnergyTrace]:
    run = GreedyRun(ps, grid_kind)
    trace = run.run(count)
    return run.snapshot(), trace


def average_energy_lower_bound_check(ps: SortedPointSet) -> bool:
    if ps.size < 1:
        raise PointSetError("average energy check needs at least one point.")
    before = energy(ps, TargetGrid(GridKind.END, ps.size))
    after = next_point(ps, GridKind.END).new_energy
    return (before + after) / 2.0 >= AVERAGE_ENERGY_FLOOR - FLOOR_SLACK
