from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from online_sampler.models.schemas import GridKind
from online_sampler.services.experiments import stacked_endpoint_example
from online_sampler.services.point_set import (
    PointSetError,
    SortedBuffer,
    SortedPointSet,
    TargetGrid,
    UnitPoint,
    energy,
    energy_permutation_oracle,
    insert,
)


def _end(n: int) -> TargetGrid:
    return TargetGrid(GridKind.END, n)


def test_unit_point_rejects_out_of_range_and_bad_rationals():
    with pytest.raises(PointSetError):
        UnitPoint(1.5)
    with pytest.raises(PointSetError):
        UnitPoint(0.5, (1, 3))
    with pytest.raises(PointSetError):
        UnitPoint(0.5, (3, 2))
    assert UnitPoint.from_fraction(2, 4).value == 0.5


def test_from_values_sorts_stably_and_keeps_rationals():
    ps = SortedPointSet.from_values([0.5, 1 / 3, 0.5], [(1, 2), (1, 3), None])
    assert ps.values.tolist() == [1 / 3, 0.5, 0.5]
    assert ps.rationals == ((1, 3), (1, 2), None)
    assert not ps.values.flags.writeable


def test_from_values_rejects_points_outside_unit_interval():
    with pytest.raises(PointSetError, match="-0.1"):
        SortedPointSet.from_values([0.2, -0.1])


def test_grid_targets():
    assert TargetGrid(GridKind.END, 4).targets().tolist() == [0.25, 0.5, 0.75, 1.0]
    assert TargetGrid(GridKind.CENTERED, 2).targets().tolist() == [0.25, 0.75]
    assert TargetGrid(GridKind.CENTERED, 5).target(3) == 0.5


def test_energy_of_exact_grid_is_zero():
    n = 17
    ps = SortedPointSet.from_values([i / n for i in range(1, n + 1)])
    assert energy(ps, _end(n)) == 0.0


def test_energy_of_default_seed(default_seed):
    assert energy(default_seed, _end(2)) == pytest.approx(2 / 3, abs=1e-15)


def test_energy_of_stacked_endpoint_example_is_n_over_16():
    ps = stacked_endpoint_example(25)
    assert energy(ps, _end(100)) == pytest.approx(6.25, abs=1e-12)


def test_energy_rejects_size_mismatch_and_empty():
    with pytest.raises(PointSetError):
        energy(SortedPointSet.from_values([0.2, 0.4]), _end(3))
    with pytest.raises(PointSetError):
        energy(SortedPointSet.empty(), _end(0))


def test_energy_is_zero_only_on_the_grid(rng):
    ps = SortedPointSet.from_values([0.25, 0.5, 0.75, 1.0 - 1e-9])
    assert energy(ps, _end(4)) > 0.0


def test_permutation_oracle_examples():
    pts = [UnitPoint(0.5), UnitPoint(1 / 3)]
    assert energy_permutation_oracle(pts, _end(2)) == pytest.approx(2 / 3)
    assert energy_permutation_oracle([UnitPoint(0.7)], _end(1)) == pytest.approx(0.3)


def test_permutation_oracle_refuses_large_inputs():
    with pytest.raises(PointSetError, match="refused"):
        energy_permutation_oracle([UnitPoint(0.1)] * 9, _end(9))


@pytest.mark.parametrize("kind", list(GridKind))
def test_sorted_energy_matches_permutation_oracle(rng, kind):
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        raw = rng.random(n)
        ps = SortedPointSet.from_values(raw)
        oracle = energy_permutation_oracle([UnitPoint(v) for v in raw], TargetGrid(kind, n))
        assert energy(ps, TargetGrid(kind, n)) == pytest.approx(oracle, abs=1e-12)


def test_sorted_energy_matches_oracle_for_eight_points(rng):
    raw = rng.random(8)
    oracle = energy_permutation_oracle([UnitPoint(v) for v in raw], _end(8))
    assert energy(SortedPointSet.from_values(raw), _end(8)) == pytest.approx(oracle, abs=1e-12)


def test_energy_invariant_under_input_permutation(rng):
    raw = rng.random(40)
    a = energy(SortedPointSet.from_values(raw), _end(40))
    b = energy(SortedPointSet.from_values(rng.permutation(raw)), _end(40))
    assert a == b


def test_energy_matches_exact_rational_reference(rng):
    n = 100_000
    ps = SortedPointSet.from_values(rng.random(n))
    exact = sum(abs(Fraction(v) - Fraction(i, n)) for i, v in enumerate(ps.values.tolist(), start=1))
    assert abs(energy(ps, _end(n)) - float(exact)) <= 1e-12 * float(exact)


def test_insert_examples():
    ps = SortedPointSet.from_values([1 / 3, 0.5])
    assert insert(ps, UnitPoint(1.0)).values.tolist() == [1 / 3, 0.5, 1.0]
    assert insert(SortedPointSet.empty(), UnitPoint(0.5)).values.tolist() == [0.5]
    triple = insert(SortedPointSet.from_values([0.5, 0.5]), UnitPoint(0.5, (1, 2)))
    assert triple.size == 3
    assert triple.rationals == (None, None, (1, 2))


def test_insert_leaves_original_untouched():
    ps = SortedPointSet.from_values([0.2, 0.8])
    insert(ps, UnitPoint(0.5))
    assert ps.values.tolist() == [0.2, 0.8]


def test_sorted_buffer_grows_and_snapshots():
    buf = SortedBuffer()
    for v in np.linspace(1.0, 0.0, 40):
        buf.add(float(v))
    snap = buf.snapshot()
    assert snap.size == 40
    assert np.all(np.diff(snap.values) >= 0)
    with pytest.raises(PointSetError):
        buf.add(2.0)
