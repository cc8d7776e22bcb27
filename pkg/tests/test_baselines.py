from __future__ import annotations

import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import integrate

from online_sampler.models.schemas import DEFAULT_SEED, SequenceKind
from online_sampler.services.baselines import (
    SequenceGenerator,
    kritzinger_next,
    kronecker_golden,
    periodic_bernoulli_next,
    sawtooth_product_integral,
    van_der_corput,
    wagner_field,
    wagner_sup,
)
from online_sampler.services.greedy_engine import next_point
from online_sampler.services.metrics import extreme_discrepancy
from online_sampler.services.point_set import PointSetError, SortedPointSet
from tests.oracles import bernoulli_objective

GRID = np.linspace(0.0, 1.0, 10_001)


def _kritzinger_objective(values: np.ndarray, c: np.ndarray) -> np.ndarray:
    m = values.size + 1
    pair = np.sum(1.0 - np.maximum(c[:, None], values[None, :]), axis=1)
    return -m * (1.0 - c * c) + 2.0 * pair + (1.0 - c)


def test_van_der_corput_prefix():
    assert [van_der_corput(i).value for i in range(1, 8)] == [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875]
    assert van_der_corput(6).rational == (3, 8)
    with pytest.raises(PointSetError):
        van_der_corput(0)


def test_kronecker_fractional_parts_are_accurate():
    getcontext().prec = 60
    frac_phi = (Decimal(5).sqrt() - 1) / 2
    for i in (1, 2, 10, 12_345, 999_999, 1_000_000):
        exact = (i * frac_phi) % 1
        assert abs(kronecker_golden(i).value - float(exact)) <= 1e-12


def test_kronecker_three_distance_property():
    values = np.sort(SequenceGenerator(SequenceKind.KRONECKER).take(10_000))
    for n in (10, 100, 1234, 10_000):
        x = np.sort(values[:n]) if n < values.size else values
        gaps = np.sort(np.concatenate((np.diff(x), [1.0 - x[-1] + x[0]])))
        distinct = 1 + int(np.count_nonzero(np.diff(gaps) > 1e-9))
        assert distinct <= 3


def test_kritzinger_examples():
    assert kritzinger_next(SortedPointSet.from_values([0.5])).value == pytest.approx(0.25)
    with pytest.raises(PointSetError):
        kritzinger_next(SortedPointSet.empty())


def test_bernoulli_examples():
    assert periodic_bernoulli_next(SortedPointSet.from_values([0.0])).value == pytest.approx(0.5)
    assert periodic_bernoulli_next(SortedPointSet.from_values([0.0, 0.5])).value == pytest.approx(0.25)
    with pytest.raises(PointSetError):
        periodic_bernoulli_next(SortedPointSet.empty())


def test_kritzinger_matches_grid_search(rng):
    for _ in range(100):
        values = np.sort(rng.random(int(rng.integers(1, 201))))
        chosen = kritzinger_next(SortedPointSet.from_values(values)).value
        ours = _kritzinger_objective(values, np.array([chosen]))[0]
        assert ours <= _kritzinger_objective(values, GRID).min() + 1e-10


def test_bernoulli_matches_grid_search(rng):
    for _ in range(100):
        values = rng.random(int(rng.integers(1, 201)))
        chosen = periodic_bernoulli_next(SortedPointSet.from_values(values)).value
        ours = bernoulli_objective(values, np.array([chosen]))[0]
        assert ours <= bernoulli_objective(values, GRID).min() + 1e-10


def test_sawtooth_product_integral_values(rng):
    assert sawtooth_product_integral(0.3, 0.3) == pytest.approx(1 / 12)
    assert sawtooth_product_integral(0.0, 0.5) == pytest.approx(-1 / 24)
    for a, b in rng.random((5, 2)):
        integrand = lambda x: (0.5 - (x - a) % 1.0) * (0.5 - (x - b) % 1.0)  # noqa: E731
        value, _ = integrate.quad(integrand, 0.0, 1.0, points=sorted((a, b)))
        assert sawtooth_product_integral(a, b) == pytest.approx(value, abs=1e-10)


def test_bernoulli_objective_is_twice_the_field_correlation(rng):
    ps = SortedPointSet.from_values(rng.random(6))
    x = 0.37
    integrand = lambda y: wagner_field(ps, y) * (0.5 - (y - x) % 1.0)  # noqa: E731
    value, _ = integrate.quad(integrand, 0.0, 1.0, points=sorted([*ps.values.tolist(), x]), limit=200)
    objective = bernoulli_objective(ps.values, np.array([x]))[0]
    assert objective == pytest.approx(2.0 * value, abs=1e-10)


def test_wagner_field_scalar_and_array():
    ps = SortedPointSet.from_values([0.25, 0.75])
    assert isinstance(wagner_field(ps, 0.5), float)
    assert wagner_field(ps, 0.5) == pytest.approx(0.0)
    assert wagner_field(ps, np.array([0.0, 0.25])).shape == (2,)


def test_wagner_sup_matches_one_sided_evaluations(rng):
    values = rng.random(30)
    ps = SortedPointSet.from_values(values)
    samples = np.concatenate((values, values - 1e-13, [0.0]))
    brute = float(np.max(np.abs(wagner_field(ps, samples))))
    assert wagner_sup(ps) == pytest.approx(brute, abs=1e-9)


def test_wagner_sup_treats_one_as_zero():
    assert wagner_sup(SortedPointSet.from_values([1.0, 0.5])) == pytest.approx(
        wagner_sup(SortedPointSet.from_values([0.0, 0.5]))
    )


def test_energy_generator_emits_seed_then_greedy_points():
    values = SequenceGenerator(SequenceKind.ENERGY).take(4)
    assert values[:2].tolist() == list(DEFAULT_SEED)
    seed = SortedPointSet.from_values(DEFAULT_SEED)
    assert values[2] == next_point(seed).chosen.value


def test_greedy_generators_accept_explicit_seeds():
    values = SequenceGenerator(SequenceKind.BERNOULLI, [0.0]).take(2)
    assert values.tolist() == [0.0, 0.5]
    kritz = SequenceGenerator(SequenceKind.KRITZINGER, [0.5]).take(2)
    assert kritz[1] == pytest.approx(0.25)


def test_index_generators_reject_seeds():
    with pytest.raises(PointSetError):
        SequenceGenerator(SequenceKind.VDC, [0.5])
    assert SequenceGenerator(SequenceKind.VDC).take(3).tolist() == [0.5, 0.25, 0.75]


def test_take_rejects_negative_counts():
    with pytest.raises(PointSetError):
        SequenceGenerator(SequenceKind.KRONECKER).take(-1)


@pytest.mark.slow
def test_bernoulli_sequence_tracks_van_der_corput():
    bern = SequenceGenerator(SequenceKind.BERNOULLI, list(DEFAULT_SEED)).take(10_000)
    vdc = SequenceGenerator(SequenceKind.VDC).take(10_000)
    for n in range(100, 10_001, 100):
        scale = n / math.log(n)
        a = scale * extreme_discrepancy(SortedPointSet.from_values(bern[:n]))
        b = scale * extreme_discrepancy(SortedPointSet.from_values(vdc[:n]))
        assert abs(a - b) <= 1.0, n
