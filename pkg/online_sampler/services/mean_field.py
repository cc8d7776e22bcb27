from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from online_sampler.models.schemas import (
    SignFunctionChecks,
    SignFunctionReport,
    MeanFieldReport,
    DerivativeBoundsReport,
)
from online_sampler.services.targets import TargetDistribution

logger = logging.getLogger("online_sampler.mean_field")

ArrayFn = Callable[[Any], np.ndarray]
Number = Union[float, Fraction]

QUAD_TOL = 1e-10
QUAD_EPSABS = 1e-12
QUAD_LIMIT = 200
GRID_SIZE = 10_000
ROOT_XTOL = 1e-13
ZERO_TOL = 1e-13
TANGENT_TOL = 1e-11
MERGE_TOL = 1e-12
BOUND_TOL = 1e-8
CHAIN_TOL = 1e-6
FLOAT_SLACK = 1e-12
FORMS_TOL = 1e-8


class MeanFieldPreconditionError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(message)
        self.achieved = achieved


class InvariantViolationError(RuntimeError):
    pass


def _quad(f: Callable[[float], float], a: float, b: float) -> float:
    if b <= a:
        return 0.0
    result = quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSABS, limit=QUAD_LIMIT, full_output=1)
    value, err = float(result[0]), float(result[1])
    if err > QUAD_TOL:
        raise QuadratureError(
            f"quadrature on [{a:.6g}, {b:.6g}] reached only {err:.3g} (target {QUAD_TOL:g})",
            achieved=err,
        )
    return value


def _scalar(fn: ArrayFn) -> Callable[[float], float]:
    return lambda t: float(fn(t))


def _merge(points: Sequence[float]) -> List[float]:
    out: List[float] = []
    for p in sorted(points):
        if not out or p - out[-1] > MERGE_TOL:
            out.append(p)
    return out


def _sign(value: float) -> int:
    if abs(value) <= ZERO_TOL:
        return 0
    return 1 if value > 0 else -1


def _piecewise_roots(knots: Sequence[Tuple[float, float]]) -> List[float]:
    roots: List[float] = []
    for (x0, f0), (x1, f1) in zip(knots, knots[1:]):
        for x, f in ((x0, f0), (x1, f1)):
            if abs(f - x) <= ZERO_TOL:
                roots.append(x)
        slope = (f1 - f0) / (x1 - x0)
        if slope != 1.0:
            root = (f0 - slope * x0) / (1.0 - slope)
            if x0 < root < x1:
                roots.append(root)
    return roots


def _grid_roots(Phi: ArrayFn) -> List[float]:
    xs = np.linspace(0.0, 1.0, GRID_SIZE + 1)
    g = Phi(xs) - xs
    near = np.abs(g) <= ZERO_TOL
    roots: List[float] = xs[near].tolist()
    fn = lambda t: float(Phi(t)) - t  # noqa: E731

    crossing = np.flatnonzero((np.sign(g[:-1]) * np.sign(g[1:]) < 0) & ~near[:-1] & ~near[1:])
    for i in crossing.tolist():
        roots.append(brentq(fn, xs[i], xs[i + 1], xtol=ROOT_XTOL))

    mag = np.abs(g)
    dips = np.flatnonzero(
        (mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:]) & (mag[1:-1] < TANGENT_TOL) & ~near[1:-1]
    )
    for i in (dips + 1).tolist():
        res = minimize_scalar(
            lambda t: abs(fn(t)), bounds=(xs[i - 1], xs[i + 1]), method="bounded", options={"xatol": ROOT_XTOL}
        )
        if abs(fn(res.x)) < TANGENT_TOL:
            logger.debug("tangential fixed point near %.6g", res.x)
            roots.append(float(res.x))
    return roots


@dataclass(frozen=True)
class SignCell:
    start: float
    end: float
    sign: int


@dataclass(frozen=True)
class MeanFieldMeasure:
    """Density, CDF and fixed-point structure of a measure on [0, 1]."""

    name: str
    phi: ArrayFn
    Phi: ArrayFn
    Phi_inv: ArrayFn
    bounds: Tuple[float, float]
    fixed_points: Tuple[float, ...]
    tangent_points: Tuple[float, ...] = ()
    diagonal_segments: Tuple[Tuple[float, float], ...] = ()
    knots: Tuple[float, ...] = ()
    cells: Tuple[SignCell, ...] = field(default=(), repr=False)

    @classmethod
    def from_distribution(cls, dist: TargetDistribution) -> "MeanFieldMeasure":
        if dist.support != (0.0, 1.0):
            raise MeanFieldPreconditionError(
                f"{dist.name} has support {dist.support}; mean-field analysis needs [0, 1]."
            )
        return cls._build(dist.name, dist.pdf, dist.cdf, dist.inv_cdf, dist.knots)

    @classmethod
    def from_callables(
        cls,
        phi: ArrayFn,
        Phi: ArrayFn,
        Phi_inv: Optional[ArrayFn] = None,
        *,
        name: str = "custom",
    ) -> "MeanFieldMeasure":
        if Phi_inv is None:
            Phi_inv = _numeric_inverse(Phi)
        return cls._build(name, phi, Phi, Phi_inv, None)

    @classmethod
    def _build(
        cls,
        name: str,
        phi: ArrayFn,
        Phi: ArrayFn,
        Phi_inv: ArrayFn,
        pl_knots: Optional[Tuple[Tuple[float, float], ...]],
    ) -> "MeanFieldMeasure":
        ends = Phi(np.array([0.0, 1.0]))
        if abs(ends[0]) > ZERO_TOL or abs(ends[1] - 1.0) > ZERO_TOL:
            raise MeanFieldPreconditionError(f"{name}: CDF must run from 0 to 1 on [0, 1].")

        knots = tuple(k[0] for k in pl_knots[1:-1]) if pl_knots else ()
        raw = _piecewise_roots(pl_knots) if pl_knots else _grid_roots(Phi)
        fixed = _merge([0.0, 1.0, *raw])

        splits = _merge([*fixed, *knots])
        cells: List[SignCell] = []
        for a, b in zip(splits, splits[1:]):
            mid = 0.5 * (a + b)
            sign = _sign(float(Phi(mid)) - mid)
            if sign == 0 and cells and cells[-1].sign == 0:
                cells[-1] = SignCell(cells[-1].start, b, 0)
            else:
                cells.append(SignCell(a, b, sign))

        diagonal = tuple((c.start, c.end) for c in cells if c.sign == 0)
        fixed = [p for p in fixed if not any(a < p < b for a, b in diagonal)]
        tangent = []
        for p in fixed[1:-1]:
            left = [c.sign for c in cells if c.end <= p]
            right = [c.sign for c in cells if c.start >= p]
            if left and right and left[-1] == right[0] != 0:
                tangent.append(p)

        grid = np.linspace(0.0, 1.0, GRID_SIZE + 1)[1:-1]
        density = phi(grid)
        bounds = (float(np.min(density)), float(np.max(density)))
        logger.debug("%s: %d fixed points, %d tangent, %d diagonal", name, len(fixed), len(tangent), len(diagonal))
        return cls(
            name=name,
            phi=phi,
            Phi=Phi,
            Phi_inv=Phi_inv,
            bounds=bounds,
            fixed_points=tuple(fixed),
            tangent_points=tuple(tangent),
            diagonal_segments=diagonal,
            knots=knots,
            cells=tuple(cells),
        )

    def require_finite_fixed_points(self) -> None:
        if self.diagonal_segments:
            a, b = self.diagonal_segments[0]
            raise MeanFieldPreconditionError(
                f"{self.name}: CDF coincides with the diagonal on [{a:.6g}, {b:.6g}], "
                "so the fixed-point set is infinite."
            )


def _numeric_inverse(Phi: ArrayFn) -> ArrayFn:
    def one(z: float) -> float:
        if z <= 0.0:
            return 0.0
        if z >= 1.0:
            return 1.0
        return brentq(lambda t: float(Phi(t)) - z, 0.0, 1.0, xtol=ROOT_XTOL)

    def inv(z: Any) -> np.ndarray:
        zs = np.asarray(z, dtype=np.float64)
        return np.vectorize(one, otypes=[np.float64])(zs)

    return inv


@dataclass(frozen=True)
class StepSignFunction:
    breakpoints: Tuple[Number, ...]
    signs: Tuple[int, ...]

    def __post_init__(self) -> None:
        bp, signs = self.breakpoints, self.signs
        if len(bp) < 2 or bp[0] != 0 or bp[-1] != 1:
            raise MeanFieldPreconditionError("breakpoints must run from 0 to 1.")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise MeanFieldPreconditionError("breakpoints must be strictly increasing.")
        if len(signs) != len(bp) - 1 or any(s not in (-1, 1) for s in signs):
            raise MeanFieldPreconditionError("need one sign in {-1, +1} per interval.")
        if any(a == b for a, b in zip(signs, signs[1:])):
            raise MeanFieldPreconditionError("adjacent intervals must carry different signs.")

    @property
    def lengths(self) -> List[Number]:
        return [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(b, (int, Fraction)) for b in self.breakpoints)

    def h_values(self) -> List[Number]:
        """h = G - mean(G) at the breakpoints, with G the running integral of the signs."""
        convert: Callable[[Number], Number] = Fraction if self.is_exact else float
        bps = [convert(b) for b in self.breakpoints]
        lengths = [b - a for a, b in zip(bps, bps[1:])]
        G: List[Number] = [convert(0)]
        for s, ell in zip(self.signs, lengths):
            G.append(G[-1] + s * ell)
        mean_G = sum((ell * (g0 + g1) / 2 for ell, g0, g1 in zip(lengths, G, G[1:])), convert(0))
        return [v - mean_G for v in G]

    @classmethod
    def from_measure(cls, m: MeanFieldMeasure) -> "StepSignFunction":
        """Sign pattern of Phi(z) - z, merged across tangent points."""
        m.require_finite_fixed_points()
        bps: List[float] = [0.0]
        signs: List[int] = []
        for cell in m.cells:
            if signs and cell.sign == signs[-1]:
                bps[-1] = cell.end
                continue
            signs.append(cell.sign)
            bps.append(cell.end)
        return cls(tuple(bps), tuple(signs))


def _integrand_terms(m: MeanFieldMeasure) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    starts = np.array([c.start for c in m.cells])
    ends = np.array([c.end for c in m.cells])
    signs = np.array([c.sign for c in m.cells], dtype=np.float64)
    return starts, ends, signs


def _split_antiderivative(m: MeanFieldMeasure, F: ArrayFn, y: np.ndarray) -> np.ndarray:
    """int_0^y s*F*F' + int_y^1 s*(F-1)*F' with s the cell sign, in closed form."""
    starts, ends, signs = _integrand_terms(m)
    fa, fb = F(starts), F(ends)
    left_cells = signs * (fb * fb - fa * fa) / 2.0
    right_cells = signs * ((fb - 1.0) ** 2 - (fa - 1.0) ** 2) / 2.0
    cum_left = np.concatenate(([0.0], np.cumsum(left_cells)))
    cum_right = np.concatenate(([0.0], np.cumsum(right_cells)))

    k = np.clip(np.searchsorted(starts, y, side="right") - 1, 0, starts.size - 1)
    fy = F(y)
    left = cum_left[k] + signs[k] * (fy * fy - fa[k] ** 2) / 2.0
    right_upto = cum_right[k] + signs[k] * ((fy - 1.0) ** 2 - (fa[k] - 1.0) ** 2) / 2.0
    return left + (cum_right[-1] - right_upto)


def continuous_energy(m: MeanFieldMeasure) -> float:
    """Adaptive quadrature of |x - Phi(x)| * phi(x) split at every kink."""
    phi, Phi = _scalar(m.phi), _scalar(m.Phi)
    pieces = [
        _quad(lambda t: abs(t - Phi(t)) * phi(t), c.start, c.end) for c in m.cells if c.sign != 0
    ]
    return math.fsum(pieces)


def continuous_energy_quantile_form(m: MeanFieldMeasure) -> float:
    Phi_inv = _scalar(m.Phi_inv)
    splits = _merge([*m.fixed_points, *(float(m.Phi(k)) for k in m.knots)])
    pieces = [_quad(lambda z: abs(Phi_inv(z) - z), a, b) for a, b in zip(splits, splits[1:])]
    return math.fsum(pieces)


def energy_derivative_at(m: MeanFieldMeasure, x: Any, method: str = "closed_form") -> Union[float, np.ndarray]:
    """Derivative of the energy under (1 - eps) * mu + eps * delta_x."""
    xs = np.asarray(x, dtype=np.float64)
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise MeanFieldPreconditionError("derivative is defined for x in [0, 1] only.")
    if method == "closed_form":
        out = _split_antiderivative(m, m.Phi, xs) + np.abs(xs - m.Phi(xs))
        return float(out) if out.ndim == 0 else out
    if method != "quadrature":
        raise MeanFieldPreconditionError(f"Unknown derivative method {method!r}.")
    if xs.ndim:
        return np.array([energy_derivative_at(m, float(v), "quadrature") for v in xs])

    phi, Phi = _scalar(m.phi), _scalar(m.Phi)
    xv = float(xs)
    total = []
    for c in m.cells:
        if c.sign == 0:
            continue
        total.append(_quad(lambda t: c.sign * Phi(t) * phi(t), c.start, min(c.end, xv)))
        total.append(_quad(lambda t: c.sign * (Phi(t) - 1.0) * phi(t), max(c.start, xv), c.end))
    total.append(abs(xv - Phi(xv)))
    return math.fsum(total)


def _with_fixed_points(m: MeanFieldMeasure) -> np.ndarray:
    return np.union1d(np.linspace(0.0, 1.0, GRID_SIZE + 1), np.array(m.fixed_points))


def minimize_derivative(m: MeanFieldMeasure) -> Tuple[float, float]:
    m.require_finite_fixed_points()
    fixed = np.array(m.fixed_points)
    at_fixed = energy_derivative_at(m, fixed)
    k = int(np.argmin(at_fixed))
    x_star, value = float(fixed[k]), float(at_fixed[k])

    grid = np.linspace(0.0, 1.0, GRID_SIZE + 1)
    scan = energy_derivative_at(m, grid)
    j = int(np.argmin(scan))
    if scan[j] < value - 10 * QUAD_TOL:
        raise InvariantViolationError(
            f"{m.name}: grid point {grid[j]:.6g} gives derivative {scan[j]:.12g}, "
            f"below the fixed-point minimum {value:.12g} at {x_star:.6g}."
        )
    return x_star, value


def _longest_constant_sign_run(m: MeanFieldMeasure) -> float:
    """Longest stretch on which Phi - x keeps one nonzero sign."""
    fixed = np.array(m.fixed_points)
    runs: List[Tuple[float, float, int]] = []
    for c in m.cells:
        if runs and c.sign == runs[-1][2] and np.min(np.abs(fixed - c.start)) > MERGE_TOL:
            runs[-1] = (runs[-1][0], c.end, c.sign)
        else:
            runs.append((c.start, c.end, c.sign))
    return max(b - a for a, b, s in runs if s != 0)


def derivative_bounds_check(m: MeanFieldMeasure) -> DerivativeBoundsReport:
    x_star, value = minimize_derivative(m)
    longest = _longest_constant_sign_run(m)
    count = len(m.fixed_points)
    gap_bound = -(longest**2) / 4.0
    sparse_bound = -1.0 / (4.0 * count)
    return DerivativeBoundsReport(
        min_value=value,
        argmin=x_star,
        longest_gap=longest,
        longest_gap_bound=gap_bound,
        fixed_point_count=count,
        sparse_fixed_point_bound=sparse_bound,
        all_satisfied=value <= gap_bound + BOUND_TOL and value <= sparse_bound + BOUND_TOL,
    )


def sign_function_analysis(g: StepSignFunction) -> SignFunctionReport:
    exact = g.is_exact
    convert: Callable[[Number], Number] = Fraction if exact else float
    bps = [convert(b) for b in g.breakpoints]
    lengths = [b - a for a, b in zip(bps, bps[1:])]

    h = g.h_values()
    h_mean = sum((ell * (h0 + h1) / 2 for ell, h0, h1 in zip(lengths, h, h[1:])), convert(0))

    k = min(range(len(h)), key=lambda i: h[i])
    X = -h[k]
    slack = 0 if exact else FLOAT_SLACK
    intervals = len(lengths)
    checks = SignFunctionChecks(
        longest_interval=X >= max(lengths) ** 2 / 4 - slack,
        sum_bound=sum(((ell - X) ** 2 for ell in lengths if ell > X), convert(0)) <= 2 * X + slack,
        sign_change_bound=X >= convert(1) / (4 * intervals) - slack,
    )
    return SignFunctionReport(
        X=float(X),
        h_min_arg=float(bps[k]),
        interval_count=intervals,
        h_mean=float(h_mean),
        exact=exact,
        checks=checks,
    )


def fixed_point_functional(m: MeanFieldMeasure, alpha: Any) -> Union[float, np.ndarray]:
    """int_0^a s(z) z dz + int_a^1 s(z) (z - 1) dz with s = sign(Phi(z) - z)."""
    alphas = np.asarray(alpha, dtype=np.float64)
    out = _split_antiderivative(m, lambda z: np.asarray(z, dtype=np.float64), alphas)
    return float(out) if out.ndim == 0 else out


def simplification_chain_check(m: MeanFieldMeasure) -> bool:
    m.require_finite_fixed_points()
    restricted = float(np.min(fixed_point_functional(m, np.array(m.fixed_points))))
    unrestricted = float(np.min(fixed_point_functional(m, _with_fixed_points(m))))
    return abs(restricted - unrestricted) <= CHAIN_TOL


def mean_field_report(m: MeanFieldMeasure) -> MeanFieldReport:
    m.require_finite_fixed_points()
    energy = continuous_energy(m)
    bounds = derivative_bounds_check(m)
    sign_report = sign_function_analysis(StepSignFunction.from_measure(m))
    at_fixed = np.array(m.fixed_points)
    closed = energy_derivative_at(m, at_fixed)
    quadrature = energy_derivative_at(m, at_fixed, method="quadrature")
    checks: Dict[str, bool] = {
        "fixed_point_minimum": True,
        "derivative_bounds": bounds.all_satisfied,
        "simplification_chain": simplification_chain_check(m),
        "sign_function_inequalities": all(sign_report.checks.model_dump().values()),
        "energy_forms_agree": abs(energy - continuous_energy_quantile_form(m)) <= FORMS_TOL,
        "derivative_forms_agree": bool(np.max(np.abs(closed - quadrature)) <= 1e-9),
    }
    logger.info("mean-field report for %s: energy=%.10g min=%.10g", m.name, energy, bounds.min_value)
    return MeanFieldReport(
        energy=energy,
        min_derivative=bounds.min_value,
        argmin=bounds.argmin,
        fixed_points=list(m.fixed_points),
        tangent_points=list(m.tangent_points),
        bounds=bounds,
        checks=checks,
    )
