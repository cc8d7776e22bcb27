from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from online_sampler.models.schemas import DiscrepancyReport, GridKind, RunConfig
from online_sampler.services.baselines import GREEDY_KINDS, SequenceGenerator
from online_sampler.services.greedy_engine import EnergyTrace, extend, progress_every
from online_sampler.services.metrics import discrepancy_report
from online_sampler.services.point_set import SortedBuffer, SortedPointSet, TargetGrid, energy
from online_sampler.utils.files import write_reports

logger = logging.getLogger("online_sampler.experiments")

PROJECTION_WEIGHTS = (0.2, -0.35, 0.2)
FULL_SCHEDULE_LIMIT = 10_000
LOG_STEPS_PER_DECADE = 40
EM_MAX_ITER = 500
EM_TOL = 1e-10
BIMODALITY_SCALE = 10_000


class ExperimentError(ValueError):
    pass


def stacked_endpoint_example(m: int) -> SortedPointSet:
    """n = 4m points: m at 0, then k/n for m < k <= 3m, then m at 1."""
    if m < 1:
        raise ExperimentError(f"m must be positive, got {m}.")
    n = 4 * m
    values = [0.0] * m + [k / n for k in range(m + 1, 3 * m + 1)] + [1.0] * m
    rationals = [(0, 1)] * m + [(k, n) for k in range(m + 1, 3 * m + 1)] + [(1, 1)] * m
    return SortedPointSet.from_values(values, rationals)


def stacked_endpoint_energies(m: int, steps: int = 3) -> np.ndarray:
    """Energy of the example followed by the energies after each greedy step."""
    ps = stacked_endpoint_example(m)
    start = energy(ps, TargetGrid(GridKind.END, ps.size))
    _, trace = extend(ps, steps, GridKind.END)
    return np.concatenate(([start], trace.energy))


@dataclass(frozen=True)
class DynamicsRecord:
    pairs: np.ndarray
    triples: np.ndarray
    projection: np.ndarray


def energy_dynamics(trace: Union[EnergyTrace, Sequence[float]], burn_in: int = 0) -> DynamicsRecord:
    energies = trace.energy if isinstance(trace, EnergyTrace) else np.asarray(trace, dtype=np.float64)
    if burn_in < 0:
        raise ExperimentError(f"burn_in must be non-negative, got {burn_in}.")
    if energies.size <= burn_in + 2:
        raise ExperimentError(
            f"trace of length {energies.size} is too short for burn_in={burn_in}; need more than {burn_in + 2}."
        )
    e = energies[burn_in:]
    a, b, c = PROJECTION_WEIGHTS
    triples = np.column_stack((e[:-2], e[1:-1], e[2:]))
    return DynamicsRecord(
        pairs=np.column_stack((e[:-1], e[1:])),
        triples=triples,
        projection=a * triples[:, 0] + b * triples[:, 1] + c * triples[:, 2],
    )


def bimodality_gain(values: Sequence[float]) -> float:
    """Log-likelihood gain of a two-component Gaussian mixture over one Gaussian.

    Scaled to a per-10^4-sample figure so runs of different length compare.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 4:
        raise ExperimentError("bimodality needs at least 4 samples.")
    mu, sigma = float(x.mean()), float(x.std())
    if sigma == 0.0:
        return 0.0
    single = float(np.sum(norm.logpdf(x, mu, sigma)))

    floor = 1e-6 * sigma
    means = np.quantile(x, [0.25, 0.75])
    stds = np.array([sigma, sigma]) / 2.0
    weights = np.array([0.5, 0.5])
    previous = -math.inf
    mixture = single
    for _ in range(EM_MAX_ITER):
        joint = np.log(weights)[None, :] + norm.logpdf(x[:, None], means[None, :], stds[None, :])
        total = logsumexp(joint, axis=1)
        mixture = float(total.sum())
        if mixture - previous < EM_TOL:
            break
        previous = mixture
        resp = np.exp(joint - total[:, None])
        mass = resp.sum(axis=0)
        weights = mass / x.size
        means = (resp * x[:, None]).sum(axis=0) / mass
        stds = np.maximum(np.sqrt((resp * (x[:, None] - means) ** 2).sum(axis=0) / mass), floor)
    return (mixture - single) * BIMODALITY_SCALE / x.size


def prefix_schedule(start: int, total: int, full: bool = False) -> List[int]:
    """Prefix sizes to evaluate: every size up to 10^4, then ceil(10^(k/40))."""
    first = max(start, 1)
    if total < first:
        return []
    if full or total <= FULL_SCHEDULE_LIMIT:
        return list(range(first, total + 1))
    sizes = set(range(first, FULL_SCHEDULE_LIMIT + 1))
    k = LOG_STEPS_PER_DECADE * 4
    while True:
        size = math.ceil(10 ** (k / LOG_STEPS_PER_DECADE))
        if size >= total:
            break
        if size >= first:
            sizes.add(size)
        k += 1
    sizes.add(total)
    return sorted(sizes)


def _seed_values(config: RunConfig) -> Optional[List[float]]:
    seed = config.resolved_seed()
    if config.random_initial:
        rng = np.random.default_rng(config.rng_seed)
        seed += rng.random(config.random_initial).tolist()
    if config.seed_points is None and not config.random_initial:
        return None
    return seed


def generate_sequence(config: RunConfig) -> np.ndarray:
    """Emitted stream for ``config``; seed points come first for greedy kinds."""
    seed = _seed_values(config)
    if seed and config.kind not in GREEDY_KINDS:
        raise ExperimentError(f"{config.kind.value} does not take seed or random initial points.")
    generator = SequenceGenerator(config.kind, seed, config.grid)
    return generator.take(config.total)


def benchmark(config: RunConfig) -> Iterator[DiscrepancyReport]:
    """Discrepancy reports at each scheduled prefix size, in increasing order."""
    values = generate_sequence(config)
    schedule = prefix_schedule(1, config.total, config.full_prefix)
    buffer = SortedBuffer()
    every = progress_every()
    added = 0
    for size in schedule:
        while added < size:
            buffer.add(float(values[added]))
            added += 1
        if every and size % every == 0:
            logger.info("benchmark %s: reached n=%d of %d", config.kind.value, size, config.total)
        yield discrepancy_report(buffer.snapshot(), config.metrics)


def write_benchmark(config: RunConfig, path: Union[str, Path], fmt: str = "csv") -> Path:
    return write_reports(list(benchmark(config)), path, fmt)


def mean_scaled_star(reports: Sequence[DiscrepancyReport], lo: int, hi: int) -> float:
    picked = [r.scaled_star for r in reports if lo <= r.n <= hi and r.scaled_star is not None]
    if not picked:
        raise ExperimentError(f"no scaled star values for n in [{lo}, {hi}].")
    return math.fsum(picked) / len(picked)

