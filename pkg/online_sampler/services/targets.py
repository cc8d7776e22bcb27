from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import TypeAdapter, ValidationError
from scipy import stats

from online_sampler.models.schemas import (
    DistributionSpec,
    GaussianSpec,
    GridKind,
    PiecewiseLinearCdfSpec,
    PowerSpec,
    TruncatedGaussianSpec,
    UniformSpec,
)
from online_sampler.services.greedy_engine import EnergyTrace, extend
from online_sampler.services.point_set import SortedPointSet

logger = logging.getLogger("online_sampler.targets")

ArrayFn = Callable[[Any], np.ndarray]

QUANTILE_CLAMP = 1e-15

_SPEC_ADAPTER: TypeAdapter = TypeAdapter(DistributionSpec)


class DistributionConfigError(ValueError):
    pass


class RetargetError(ValueError):
    pass


@dataclass(frozen=True)
class TargetDistribution:
    name: str
    support: Tuple[float, float]
    pdf: ArrayFn
    cdf: ArrayFn
    inv_cdf: ArrayFn
    knots: Optional[Tuple[Tuple[float, float], ...]] = None

    @property
    def finite_support(self) -> bool:
        return math.isfinite(self.support[0]) and math.isfinite(self.support[1])

    def contains(self, x: np.ndarray) -> np.ndarray:
        a, b = self.support
        return (x >= a) & (x <= b)


def _clamped_quantile(ppf: ArrayFn, name: str) -> ArrayFn:
    def inv_cdf(u: Any) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        at_ends = (u <= 0.0) | (u >= 1.0)
        if np.any(at_ends):
            logger.warning(
                "%s: %d quantile request(s) at 0 or 1 clamped to [%g, 1-%g]",
                name,
                int(np.count_nonzero(at_ends)),
                QUANTILE_CLAMP,
                QUANTILE_CLAMP,
            )
            u = np.clip(u, QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP)
        return ppf(u)

    return inv_cdf


def _from_frozen(name: str, dist: Any, support: Tuple[float, float]) -> TargetDistribution:
    inv_cdf: ArrayFn = dist.ppf
    if not (math.isfinite(support[0]) and math.isfinite(support[1])):
        inv_cdf = _clamped_quantile(dist.ppf, name)
    return TargetDistribution(
        name=name,
        support=support,
        pdf=lambda x: np.asarray(dist.pdf(x), dtype=np.float64),
        cdf=lambda x: np.asarray(dist.cdf(x), dtype=np.float64),
        inv_cdf=lambda u: np.asarray(inv_cdf(u), dtype=np.float64),
    )


def _power(spec: PowerSpec) -> TargetDistribution:
    theta = spec.theta

    def pdf(x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        inside = (x > 0.0) & (x <= 1.0)
        safe = np.where(inside, x, 1.0)
        return np.where(inside, theta * safe ** (theta - 1.0), 0.0)

    def cdf(x: Any) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) ** theta

    def inv_cdf(u: Any) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0) ** (1.0 / theta)

    return TargetDistribution(f"power({theta:g})", (0.0, 1.0), pdf, cdf, inv_cdf)


def _piecewise_linear(spec: PiecewiseLinearCdfSpec) -> TargetDistribution:
    xs = np.array([k[0] for k in spec.knots], dtype=np.float64)
    fs = np.array([k[1] for k in spec.knots], dtype=np.float64)
    slopes = np.diff(fs) / np.diff(xs)

    def pdf(x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        seg = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, slopes.size - 1)
        return np.where((x >= xs[0]) & (x <= xs[-1]), slopes[seg], 0.0)

    def cdf(x: Any) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=np.float64), xs, fs)

    def inv_cdf(u: Any) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        # Left search: a flat segment at level u inverts to its left endpoint.
        k = np.clip(np.searchsorted(fs, u, side="left"), 1, fs.size - 1)
        f0, f1 = fs[k - 1], fs[k]
        x0, x1 = xs[k - 1], xs[k]
        width = np.where(f1 > f0, f1 - f0, 1.0)
        inner = x0 + (u - f0) / width * (x1 - x0)
        return np.where(u <= fs[0], xs[0], np.where(f1 > f0, inner, x1))

    knots = tuple((float(a), float(b)) for a, b in zip(xs, fs))
    return TargetDistribution(
        "piecewise_linear_cdf", (float(xs[0]), float(xs[-1])), pdf, cdf, inv_cdf, knots=knots
    )


def make_distribution(spec: Union[Mapping[str, Any], Any]) -> TargetDistribution:
    if isinstance(spec, Mapping):
        try:
            spec = _SPEC_ADAPTER.validate_python(dict(spec))
        except ValidationError as exc:
            raise DistributionConfigError(f"Invalid distribution spec: {exc}") from exc

    if isinstance(spec, UniformSpec):
        return _from_frozen(
            f"uniform({spec.a:g},{spec.b:g})",
            stats.uniform(loc=spec.a, scale=spec.b - spec.a),
            (spec.a, spec.b),
        )
    if isinstance(spec, GaussianSpec):
        return _from_frozen(
            f"gaussian({spec.mean:g},{spec.std:g})",
            stats.norm(loc=spec.mean, scale=spec.std),
            (-math.inf, math.inf),
        )
    if isinstance(spec, TruncatedGaussianSpec):
        lo = (spec.a - spec.mean) / spec.std
        hi = (spec.b - spec.mean) / spec.std
        return _from_frozen(
            f"truncated_gaussian({spec.mean:g},{spec.std:g},{spec.a:g},{spec.b:g})",
            stats.truncnorm(lo, hi, loc=spec.mean, scale=spec.std),
            (spec.a, spec.b),
        )
    if isinstance(spec, PiecewiseLinearCdfSpec):
        return _piecewise_linear(spec)
    if isinstance(spec, PowerSpec):
        return _power(spec)
    raise DistributionConfigError(f"Unsupported distribution spec: {spec!r}")


@dataclass(frozen=True)
class RetargetPlan:
    original_points: np.ndarray
    cdf_images: SortedPointSet
    points_needed_estimate: int


def imbalance_floor(points_in_region: int, region_mass: float) -> int:
    if not (0.0 < region_mass <= 1.0):
        raise RetargetError(f"region_mass must lie in (0, 1], got {region_mass!r}.")
    return math.ceil(points_in_region / region_mass)


def retarget(
    points: Sequence[float],
    dist: TargetDistribution,
    add_count: int,
    *,
    region: Optional[Tuple[float, float]] = None,
) -> Tuple[np.ndarray, RetargetPlan, EnergyTrace]:
    """Extend a real-line point set towards ``dist`` by working in CDF space.

    Original points are kept as given; only the new CDF-space points are
    mapped back through the quantile function.
    """
    original = np.asarray(points, dtype=np.float64)
    outside = ~dist.contains(original)
    if np.any(outside):
        bad = float(original[np.argmax(outside)])
        raise RetargetError(f"Point {bad!r} lies outside the support {dist.support} of {dist.name}.")

    images = np.clip(dist.cdf(original), 0.0, 1.0)
    cdf_images = SortedPointSet.from_values(images)
    _, trace = extend(cdf_images, add_count, GridKind.END)
    new_points = dist.inv_cdf(trace.chosen)

    if original.size == 0 and region is None:
        estimate = 0
    else:
        lo, hi = region if region is not None else (float(original.min()), float(original.max()))
        in_region = int(np.count_nonzero((original >= lo) & (original <= hi)))
        mass = float(dist.cdf(hi) - dist.cdf(lo))
        estimate = imbalance_floor(in_region, min(mass, 1.0)) if mass > 0.0 else original.size
    logger.info(
        "retarget %s: %d original + %d new points, imbalance floor %d",
        dist.name,
        original.size,
        add_count,
        estimate,
    )

    plan = RetargetPlan(original_points=original, cdf_images=cdf_images, points_needed_estimate=estimate)
    return np.concatenate([original, new_points]), plan, trace
