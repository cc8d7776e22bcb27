from __future__ import annotations

from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, model_validator


class GridKind(str, Enum):
    END = "end"
    CENTERED = "centered"


class SequenceKind(str, Enum):
    VDC = "vdc"
    KRONECKER = "kronecker"
    KRITZINGER = "kritzinger"
    BERNOULLI = "bernoulli"
    ENERGY = "energy"


MetricName = Literal["star", "extreme", "l1_star", "periodic_l2"]
ALL_METRICS: Tuple[MetricName, ...] = ("star", "extreme", "l1_star", "periodic_l2")
DEFAULT_SEED: Tuple[float, float] = (1.0 / 3.0, 0.5)


# --- distribution specs -----------------------------------------------------


class UniformSpec(BaseModel):
    type: Literal["uniform"] = "uniform"
    a: float = 0.0
    b: float = 1.0

    @model_validator(mode="after")
    def _check_interval(self) -> "UniformSpec":
        if not self.a < self.b:
            raise ValueError(f"uniform requires a < b, got a={self.a}, b={self.b}")
        return self


class GaussianSpec(BaseModel):
    type: Literal["gaussian"] = "gaussian"
    mean: float = 0.0
    std: float = Field(default=1.0, gt=0.0)


class TruncatedGaussianSpec(BaseModel):
    type: Literal["truncated_gaussian"] = "truncated_gaussian"
    mean: float = 0.0
    std: float = Field(default=1.0, gt=0.0)
    a: float
    b: float

    @model_validator(mode="after")
    def _check_interval(self) -> "TruncatedGaussianSpec":
        if not self.a < self.b:
            raise ValueError(f"truncated_gaussian requires a < b, got a={self.a}, b={self.b}")
        return self


class PiecewiseLinearCdfSpec(BaseModel):
    type: Literal["piecewise_linear_cdf"] = "piecewise_linear_cdf"
    knots: List[Tuple[float, float]] = Field(..., min_length=2)

    @model_validator(mode="after")
    def _check_knots(self) -> "PiecewiseLinearCdfSpec":
        xs = [k[0] for k in self.knots]
        fs = [k[1] for k in self.knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knot abscissae must be strictly increasing")
        if any(b < a for a, b in zip(fs, fs[1:])):
            raise ValueError("knot CDF values must be non-decreasing")
        if fs[0] != 0.0 or fs[-1] != 1.0:
            raise ValueError("knot CDF values must start at 0 and end at 1")
        return self


class PowerSpec(BaseModel):
    type: Literal["power"] = "power"
    theta: float = Field(..., gt=0.0)


DistributionSpec = Annotated[
    Union[UniformSpec, GaussianSpec, TruncatedGaussianSpec, PiecewiseLinearCdfSpec, PowerSpec],
    Field(discriminator="type"),
]


# --- reports ----------------------------------------------------------------


class DiscrepancyReport(BaseModel):
    n: int = Field(..., ge=1)
    star: Optional[float] = None
    extreme: Optional[float] = None
    l1_star: Optional[float] = None
    periodic_l2: Optional[float] = None
    scaled_star: Optional[float] = None
    scaled_extreme: Optional[float] = None


class RunConfig(BaseModel):
    kind: SequenceKind = SequenceKind.ENERGY
    seed_points: Union[Literal["default_seed"], List[float], None] = None
    total: int = Field(..., gt=0)
    grid: GridKind = GridKind.END
    metrics: List[MetricName] = Field(default_factory=lambda: list(ALL_METRICS))
    random_initial: int = Field(default=0, ge=0)
    rng_seed: Optional[int] = None
    full_prefix: bool = False
    out_path: Optional[str] = None

    @model_validator(mode="after")
    def _check_sizes(self) -> "RunConfig":
        if self.random_initial > 0 and self.rng_seed is None:
            raise ValueError("rng_seed is required when random_initial > 0")
        if self.seed_size() > self.total:
            raise ValueError(f"total={self.total} is smaller than the seed size {self.seed_size()}")
        return self

    def resolved_seed(self) -> List[float]:
        if self.seed_points == "default_seed":
            return list(DEFAULT_SEED)
        return list(self.seed_points or [])

    def seed_size(self) -> int:
        return len(self.resolved_seed()) + self.random_initial


class DerivativeBoundsReport(BaseModel):
    min_value: float
    argmin: float
    longest_gap: float
    longest_gap_bound: float
    fixed_point_count: int
    sparse_fixed_point_bound: float
    all_satisfied: bool


class SignFunctionChecks(BaseModel):
    longest_interval: bool
    sum_bound: bool
    sign_change_bound: bool


class SignFunctionReport(BaseModel):
    X: float
    h_min_arg: float
    interval_count: int
    h_mean: float
    exact: bool
    checks: SignFunctionChecks


class MeanFieldReport(BaseModel):
    energy: float
    min_derivative: float
    argmin: float
    fixed_points: List[float]
    tangent_points: List[float] = Field(default_factory=list)
    bounds: DerivativeBoundsReport
    checks: Dict[str, bool] = Field(default_factory=dict)


# --- HTTP bodies --------------------------------------------------------------


class TraceRow(BaseModel):
    n: int
    chosen: float
    energy: float


class ExtendRequest(BaseModel):
    points: List[float] = Field(default_factory=list)
    count: int = Field(..., ge=1)
    grid: GridKind = GridKind.END


class ExtendResponse(BaseModel):
    points: List[float]
    trace: List[TraceRow]


class PointsRequest(BaseModel):
    points: List[float] = Field(..., min_length=1)


class RetargetRequest(BaseModel):
    points: List[float] = Field(..., min_length=1)
    distribution: DistributionSpec
    add_count: int = Field(..., ge=1)


class RetargetResponse(BaseModel):
    points: List[float]
    new_points: List[float]
    cdf_images: List[float]
    points_needed_estimate: int


class PredictResponse(BaseModel):
    predicted: float
    greedy: float
    gap: float
    degenerate: bool = False


class MeanFieldRequest(BaseModel):
    distribution: DistributionSpec


class GenerateRequest(BaseModel):
    kind: SequenceKind
    count: int = Field(..., ge=1)
    seed_points: Union[Literal["default_seed"], List[float], None] = None
    grid: GridKind = GridKind.END


class GenerateResponse(BaseModel):
    kind: SequenceKind
    values: List[float]
