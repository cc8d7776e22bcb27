from __future__ import annotations

import logging
import os
from contextlib import asynccontextmanager
from typing import Callable, TypeVar

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException

from online_sampler.models.schemas import (
    DiscrepancyReport,
    ExtendRequest,
    ExtendResponse,
    GenerateRequest,
    GenerateResponse,
    MeanFieldReport,
    MeanFieldRequest,
    PointsRequest,
    PredictResponse,
    RetargetRequest,
    RetargetResponse,
    TraceRow,
)
from online_sampler.services.baselines import SequenceGenerator
from online_sampler.services.greedy_engine import extend, next_point
from online_sampler.services.heuristics import predict_next
from online_sampler.services.mean_field import MeanFieldMeasure, mean_field_report
from online_sampler.services.metrics import discrepancy_report
from online_sampler.services.point_set import SortedPointSet
from online_sampler.services.targets import make_distribution, retarget

logger = logging.getLogger("online_sampler.api")

T = TypeVar("T")


def max_api_points() -> int:
    return int(os.getenv("ONLINE_SAMPLER_MAX_API_POINTS", "200000"))


@asynccontextmanager
async def lifespan(_: FastAPI):
    load_dotenv()
    logger.info("online sampler API ready (max %d points per request)", max_api_points())
    yield


app = FastAPI(title="Online Sampler API", version="1.0.0", lifespan=lifespan)


def _guard_size(total: int) -> None:
    limit = max_api_points()
    if total > limit:
        raise HTTPException(status_code=413, detail=f"Request needs {total} points; the limit is {limit}.")


def _call(fn: Callable[[], T]) -> T:
    try:
        return fn()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except RuntimeError as exc:
        logger.exception("numerical failure")
        raise HTTPException(status_code=500, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/extend", response_model=ExtendResponse)
def extend_points(payload: ExtendRequest) -> ExtendResponse:
    _guard_size(len(payload.points) + payload.count)

    def work() -> ExtendResponse:
        ps = SortedPointSet.from_values(payload.points)
        extended, trace = extend(ps, payload.count, payload.grid)
        rows = [TraceRow(n=n, chosen=c, energy=e) for n, c, e in trace.entries]
        return ExtendResponse(points=extended.values.tolist(), trace=rows)

    return _call(work)


@app.post("/metrics", response_model=DiscrepancyReport)
def metrics(payload: PointsRequest) -> DiscrepancyReport:
    _guard_size(len(payload.points))
    return _call(lambda: discrepancy_report(SortedPointSet.from_values(payload.points)))


@app.post("/retarget", response_model=RetargetResponse)
def retarget_points(payload: RetargetRequest) -> RetargetResponse:
    _guard_size(len(payload.points) + payload.add_count)

    def work() -> RetargetResponse:
        dist = make_distribution(payload.distribution)
        points, plan, _ = retarget(payload.points, dist, payload.add_count)
        return RetargetResponse(
            points=points.tolist(),
            new_points=points[len(payload.points) :].tolist(),
            cdf_images=plan.cdf_images.values.tolist(),
            points_needed_estimate=plan.points_needed_estimate,
        )

    return _call(work)


@app.post("/predict", response_model=PredictResponse)
def predict(payload: PointsRequest) -> PredictResponse:
    _guard_size(len(payload.points))

    def work() -> PredictResponse:
        ps = SortedPointSet.from_values(payload.points)
        guess = predict_next(ps)
        greedy = next_point(ps).chosen.value
        return PredictResponse(
            predicted=guess.x,
            greedy=greedy,
            gap=abs(guess.x - greedy),
            degenerate=guess.degenerate,
        )

    return _call(work)


@app.post("/meanfield", response_model=MeanFieldReport)
def meanfield(payload: MeanFieldRequest) -> MeanFieldReport:
    def work() -> MeanFieldReport:
        measure = MeanFieldMeasure.from_distribution(make_distribution(payload.distribution))
        return mean_field_report(measure)

    return _call(work)


@app.post("/generate", response_model=GenerateResponse)
def generate(payload: GenerateRequest) -> GenerateResponse:
    _guard_size(payload.count)

    def work() -> GenerateResponse:
        seed = payload.seed_points
        if seed == "default_seed":
            seed = None
        generator = SequenceGenerator(payload.kind, seed, payload.grid)
        return GenerateResponse(kind=payload.kind, values=generator.take(payload.count).tolist())

    return _call(work)
