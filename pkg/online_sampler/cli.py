from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from online_sampler.models.schemas import ALL_METRICS, DEFAULT_SEED, GridKind, RunConfig, SequenceKind
from online_sampler.services.baselines import GREEDY_KINDS, SequenceGenerator
from online_sampler.services.experiments import (
    benchmark,
    bimodality_gain,
    energy_dynamics,
    stacked_endpoint_energies,
)
from online_sampler.services.greedy_engine import extend, next_point
from online_sampler.services.heuristics import predict_next
from online_sampler.services.mean_field import MeanFieldMeasure, mean_field_report
from online_sampler.services.metrics import discrepancy_report
from online_sampler.services.point_set import SortedPointSet
from online_sampler.services.targets import make_distribution, retarget
from online_sampler.utils.files import (
    FORMATS,
    REPORT_COLUMNS,
    TRACE_COLUMNS,
    read_distribution_spec,
    read_point_set,
    read_points,
    render_points,
    render_table,
    report_rows,
    trace_rows,
    write_points,
    write_table,
)

logger = logging.getLogger("online_sampler.cli")


def _emit_table(args: argparse.Namespace, header: Sequence[str], rows: List[Sequence[Any]], title: str) -> None:
    if args.out:
        path = write_table(header, rows, args.out, args.format, title=title)
        logger.info("wrote %d rows to %s", len(rows), path)
    else:
        sys.stdout.write(render_table(header, rows, args.format))


def _emit_points(args: argparse.Namespace, values: Sequence[float], rationals: Optional[Sequence[Any]] = None) -> None:
    if args.out:
        path = write_points(values, args.out, rationals, args.format)
        logger.info("wrote %d points to %s", len(values), path)
    else:
        sys.stdout.write(render_points(values, rationals, args.format))


def _seed_set(args: argparse.Namespace) -> SortedPointSet:
    if args.seed_file:
        return read_point_set(args.seed_file)
    random_initial = getattr(args, "random_initial", 0)
    if random_initial:
        if args.rng_seed is None:
            raise ValueError("--random-initial needs --rng-seed for a reproducible start.")
        rng = np.random.default_rng(args.rng_seed)
        return SortedPointSet.from_values(rng.random(random_initial))
    return SortedPointSet.from_values(DEFAULT_SEED)


def _required_seed(args: argparse.Namespace) -> SortedPointSet:
    if not args.seed_file:
        raise ValueError(f"'{args.cmd}' needs --seed-file.")
    return read_point_set(args.seed_file)


def cmd_gen(args: argparse.Namespace) -> None:
    kind = SequenceKind(args.kind)
    seed = None
    if kind in GREEDY_KINDS and args.seed_file:
        seed = read_point_set(args.seed_file).values.tolist()
    generator = SequenceGenerator(kind, seed, GridKind(args.grid))
    _emit_points(args, generator.take(args.count).tolist())


def cmd_extend(args: argparse.Namespace) -> None:
    ps = _seed_set(args)
    extended, trace = extend(ps, args.count, GridKind(args.grid))
    if args.points:
        _emit_points(args, extended.values.tolist(), list(extended.rationals))
        return
    _emit_table(args, TRACE_COLUMNS, trace_rows(trace.n, trace.chosen, trace.energy), "trace")


def cmd_retarget(args: argparse.Namespace) -> None:
    if not args.seed_file:
        raise ValueError("'retarget' needs --seed-file with the real-line points.")
    values, _ = read_points(args.seed_file)
    dist = make_distribution(read_distribution_spec(args.dist))
    points, plan, _ = retarget(values, dist, args.add)
    logger.info(
        "%s: at least %d points needed to balance the occupied region", dist.name, plan.points_needed_estimate
    )
    _emit_points(args, points.tolist())


def cmd_metrics(args: argparse.Namespace) -> None:
    report = discrepancy_report(_required_seed(args), args.metrics)
    _emit_table(args, REPORT_COLUMNS, report_rows([report]), "discrepancy")


def cmd_bench(args: argparse.Namespace) -> None:
    seed_points: Any = None
    if args.seed_file:
        seed_points = read_point_set(args.seed_file).values.tolist()
    elif SequenceKind(args.kind) in GREEDY_KINDS and not args.random_initial:
        seed_points = "default_seed"
    config = RunConfig(
        kind=args.kind,
        seed_points=seed_points,
        total=args.total,
        grid=args.grid,
        metrics=args.metrics,
        random_initial=args.random_initial,
        rng_seed=args.rng_seed,
        full_prefix=args.full_prefix,
        out_path=args.out,
    )
    _emit_table(args, REPORT_COLUMNS, report_rows(benchmark(config)), "benchmark")


def cmd_dynamics(args: argparse.Namespace) -> None:
    ps = _seed_set(args)
    _, trace = extend(ps, args.count, GridKind(args.grid))
    record = energy_dynamics(trace, args.burn_in)
    logger.info("projection bimodality gain per 1e4 samples: %.3f", bimodality_gain(record.projection))
    start = trace.n[args.burn_in :]
    rows = [
        (int(n), *map(float, triple), float(proj))
        for n, triple, proj in zip(start, record.triples, record.projection)
    ]
    _emit_table(args, ("n", "E_n", "E_n1", "E_n2", "projection"), rows, "dynamics")


def cmd_meanfield(args: argparse.Namespace) -> None:
    measure = MeanFieldMeasure.from_distribution(make_distribution(read_distribution_spec(args.dist)))
    payload = json.dumps(mean_field_report(measure).model_dump(), indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def cmd_predict(args: argparse.Namespace) -> None:
    ps = _seed_set(args)
    guess = predict_next(ps)
    greedy = next_point(ps, GridKind(args.grid)).chosen.value
    row = (guess.x, greedy, abs(guess.x - greedy), guess.degenerate)
    _emit_table(args, ("predicted", "greedy", "gap", "degenerate"), [row], "predict")


def cmd_stacked(args: argparse.Namespace) -> None:
    energies = stacked_endpoint_energies(args.m, args.steps)
    rows = [(step, float(e), float(e - energies[0])) for step, e in enumerate(energies)]
    _emit_table(args, ("step", "energy", "change"), rows, "stacked")


def cmd_serve(args: argparse.Namespace) -> None:
    import uvicorn

    host = args.host or os.getenv("ONLINE_SAMPLER_HOST", "127.0.0.1")
    port = args.port or int(os.getenv("ONLINE_SAMPLER_PORT", "8000"))
    uvicorn.run("online_sampler.main:app", host=host, port=port)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed-file", default=None, help="Point-set file (one value per line, optional num/den).")
    common.add_argument("--out", default=None, help="Output path; stdout when omitted.")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--rng-seed", type=int, default=None)
    common.add_argument("--grid", choices=[g.value for g in GridKind], default=GridKind.END.value)

    p = argparse.ArgumentParser(prog="online_sampler", description="Greedy online sampling toolkit.")
    sub = p.add_subparsers(dest="cmd", required=True)

    p_gen = sub.add_parser("gen", parents=[common], help="Emit a sequence.")
    p_gen.add_argument("--kind", choices=[k.value for k in SequenceKind], required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_ext = sub.add_parser("extend", parents=[common], help="Greedily extend a point set.")
    p_ext.add_argument("--count", type=int, required=True)
    p_ext.add_argument("--random-initial", type=int, default=0, help="Start from this many iid uniform points.")
    p_ext.add_argument("--points", action="store_true", help="Write the extended set instead of the trace.")
    p_ext.set_defaults(func=cmd_extend)

    p_rt = sub.add_parser("retarget", parents=[common], help="Extend real-line points towards a distribution.")
    p_rt.add_argument("--dist", required=True, help="Distribution spec JSON file.")
    p_rt.add_argument("--add", type=int, required=True)
    p_rt.set_defaults(func=cmd_retarget)

    p_met = sub.add_parser("metrics", parents=[common], help="Discrepancy report of a point set.")
    p_met.add_argument("--metrics", nargs="+", choices=ALL_METRICS, default=list(ALL_METRICS))
    p_met.set_defaults(func=cmd_metrics)

    p_bench = sub.add_parser("bench", parents=[common], help="Prefix discrepancy benchmark.")
    p_bench.add_argument("--kind", choices=[k.value for k in SequenceKind], required=True)
    p_bench.add_argument("--total", type=int, required=True)
    p_bench.add_argument("--metrics", nargs="+", choices=ALL_METRICS, default=list(ALL_METRICS))
    p_bench.add_argument("--random-initial", type=int, default=0)
    p_bench.add_argument("--full-prefix", action="store_true")
    p_bench.set_defaults(func=cmd_bench)

    p_dyn = sub.add_parser("dynamics", parents=[common], help="Consecutive-energy pairs, triples and projection.")
    p_dyn.add_argument("--count", type=int, required=True)
    p_dyn.add_argument("--burn-in", type=int, default=0)
    p_dyn.set_defaults(func=cmd_dynamics)

    p_mf = sub.add_parser("meanfield", parents=[common], help="Continuous-limit report for a measure on [0, 1].")
    p_mf.add_argument("--dist", required=True, help="Distribution spec JSON file.")
    p_mf.set_defaults(func=cmd_meanfield)

    p_pred = sub.add_parser("predict", parents=[common], help="First-order guess for the next greedy point.")
    p_pred.set_defaults(func=cmd_predict)

    p_stacked = sub.add_parser(
        "stacked",
        aliases=["prop3"],
        parents=[common],
        help="Energy of the stacked-endpoint example under greedy steps.",
    )
    p_stacked.add_argument("--m", type=int, default=25)
    p_stacked.add_argument("--steps", type=int, default=3)
    p_stacked.set_defaults(func=cmd_stacked)

    p_srv = sub.add_parser("serve", help="Run the HTTP API.")
    p_srv.add_argument("--host", default=None)
    p_srv.add_argument("--port", type=int, default=None)
    p_srv.set_defaults(func=cmd_serve)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("ONLINE_SAMPLER_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
