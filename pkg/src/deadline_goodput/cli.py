"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 usage or domain error.
Errors are reported on stderr as a single ``error=<kind> detail="..."`` line.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import coding, skipping
from .core import DomainError, ModelParams
from .experiments import (
    GRIDS,
    OPTIMAL,
    TABLE1_COLUMNS,
    VALIDATION_COLUMNS,
    ExperimentSpec,
    evaluate_point,
    fmt,
    sweep_columns,
    sweep_rows,
    table1_rows,
    validate_points,
    write_csv,
)
from .optimizer import additional_gain, optimal_threshold
from .simulator import COUNTER_NAMES, ConfigError, Policy, SimConfig, format_trace, run, trace_run
from .simulator.engine import STATE_LABELS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # one machine-readable line instead of the usage dump
        raise UsageError(message)


def _fail(kind: str, detail: str, code: int = 2) -> int:
    detail = str(detail).replace("\n", " ").replace('"', "'")
    print(f'error={kind} detail="{detail}"', file=sys.stderr)
    return code


def _emit(pairs: dict, out: str | None = None) -> None:
    text = "\n".join(f"{k}={fmt(v)}" for k, v in pairs.items()) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _emit_csv(rows, columns, out: str | None) -> None:
    text = write_csv(rows, columns, out)
    if not out:
        sys.stdout.write(text)


def _add_point_flags(p: argparse.ArgumentParser, *, theta_opt: bool = False) -> None:
    p.add_argument("--lambda", dest="lam", type=float, help="total arrival rate (split evenly for two-flow models)")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--d", type=float, default=1.0, help="relative deadline")
    if theta_opt:
        p.add_argument("--theta", default="0", help=f"threshold, or {OPTIMAL!r} for the optimum")
    else:
        p.add_argument("--theta", type=float, default=0.0)


def _add_sim_flags(p: argparse.ArgumentParser, *, arrivals: int, replications: int) -> None:
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--arrivals", type=int, default=arrivals, help="counted arrivals per replication")
    p.add_argument("--warmup", type=int, default=None, help="discarded arrivals (default 10%% of --arrivals)")
    p.add_argument("--replications", type=int, default=replications)


def _params(args, two_flow: bool, theta: float) -> ModelParams:
    if args.lam is not None:
        if args.lambda1 is not None or args.lambda2 is not None:
            raise UsageError("--lambda cannot be combined with --lambda1/--lambda2")
        if two_flow:
            return ModelParams.symmetric(args.lam, args.mu, args.d, theta)
        return ModelParams.single(args.lam, args.mu, args.d, theta)
    if args.lambda1 is None:
        raise UsageError("give --lambda or --lambda1")
    return ModelParams(args.lambda1, args.lambda2 or 0.0, args.mu, args.d, theta)


def _theta_value(text) -> float | str:
    if str(text) == OPTIMAL:
        return OPTIMAL
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"invalid --theta {text!r}") from exc


# -- subcommands -------------------------------------------------------------


def cmd_eval(args) -> int:
    theta = _theta_value(args.theta)
    two_flow = args.model in ("coding", "joint")
    p = _params(args, two_flow, 0.0 if theta == OPTIMAL else theta)
    row = evaluate_point(args.model, p.lambda1, p.lambda2, p.mu, p.d, theta, args.resolution)
    q = p.replace(theta=row["theta"])
    out: dict = {}
    if args.model in ("skipping", "base"):
        single = ModelParams.single(q.lam, q.mu, q.d, q.theta)
        out["gamma"] = row["gamma_total"]
        out["theta"] = row["theta"]
        out["gamma_base"] = row["gamma_base"]
        out["gain_percent"] = row["gain_percent"]
        out["p_empty"] = skipping.prob_empty(single)
        out["clearance_time"] = skipping.expected_clearance_time(single)
        out["busy_period"] = skipping.expected_busy_period(single)
    else:
        for key in ("gamma_flow1", "gamma_flow2", "gamma_total", "gamma_base", "gain_percent", "theta"):
            out[key] = row[key]
        if "additional_gain_percent" in row:
            out["additional_gain_percent"] = row["additional_gain_percent"]
        if q.lam > 0:
            states = coding.state_distribution(q)
            out.update(
                p_empty=states.p_empty,
                p_busy=states.p_busy,
                p_full_type1=states.p_full_type1,
                p_full_type2=states.p_full_type2,
                p_full_coded=states.p_full_coded,
            )
    _emit(out)
    return 0


def cmd_table1(args) -> int:
    _emit_csv(table1_rows(args.resolution), TABLE1_COLUMNS, args.out)
    return 0


def cmd_sweep(args) -> int:
    flags = {
        "model": args.model,
        "lambda": args.lam,
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "total": args.total,
        "d": args.d,
        "theta": args.theta,
        "mu": args.mu,
        "resolution": args.resolution,
        "out": args.out,
    }
    if args.spec:
        spec = ExperimentSpec.load(args.spec, flags)
    else:
        defaults = {"model": "skipping", "d": "1", "theta": "0", "mu": 1.0}
        spec = ExperimentSpec.from_mapping({**defaults, **{k: v for k, v in flags.items() if v is not None}})
    rows = sweep_rows(spec, workers=args.workers)
    _emit_csv(rows, sweep_columns(spec), spec.out)
    return 0


def cmd_optimize(args) -> int:
    p = _params(args, args.model == "joint", 0.0)
    res = optimal_threshold(p, args.model, args.resolution, extended=args.extended)
    out = {"theta_star": res.theta_star, "max_gain_percent": res.gain_percent, "resolution": res.grid_resolution}
    if args.model == "joint":
        out["additional_gain_percent"] = 100.0 * additional_gain(p, args.resolution, extended=args.extended)[1]
    _emit(out)
    return 0


def cmd_simulate(args) -> int:
    policy = Policy(args.policy)
    p = _params(args, policy.codes, args.theta)
    if args.trace:
        result = trace_run(p, policy, args.seed, args.trace_events)
        Path(args.trace).write_text("\n".join(format_trace(result.trace)) + "\n", encoding="utf-8")
    config = SimConfig(
        seed=args.seed, arrivals_target=args.arrivals, warmup_arrivals=args.warmup, replications=args.replications
    )
    est = run(p, policy, config)
    if args.json:
        sys.stdout.write(est.to_json() + "\n")
        return 0
    out = {
        "goodput_flow1": est.goodput_flow1,
        "goodput_flow2": est.goodput_flow2,
        "goodput_total": est.goodput_total,
        "ci_halfwidth_flow1": est.ci_halfwidth_flow1,
        "ci_halfwidth_flow2": est.ci_halfwidth_flow2,
        "replications": est.replications,
    }
    for label, frac in zip(STATE_LABELS, est.state_time_fractions):
        out[f"time_fraction_{label}"] = frac
    for name in COUNTER_NAMES:
        out[f"{name}_flow1"], out[f"{name}_flow2"] = est.counts[name]
    _emit(out)
    return 0


def cmd_validate(args) -> int:
    points = GRIDS[args.grid]
    config = SimConfig(
        seed=args.seed, arrivals_target=args.arrivals, warmup_arrivals=args.warmup, replications=args.replications
    )
    rows = validate_points(points, config, extended=args.extended, corrupt=args.corrupt)
    _emit_csv(rows, VALIDATION_COLUMNS, args.out)
    failed = sum(not r["passed"] for r in rows)
    print(f"validated={len(rows)} failed={failed}", file=sys.stderr)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dlgoodput", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate one parameter point")
    p.add_argument("--model", choices=("skipping", "coding", "joint", "base"), default="skipping")
    _add_point_flags(p, theta_opt=True)
    p.add_argument("--resolution", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("table1", help="maximal skipping gain on the fixed lambda x d grid")
    p.add_argument("--out")
    p.add_argument("--resolution", type=float, default=None)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("sweep", help="grid sweep written as CSV")
    p.add_argument("--spec", help="flat JSON file with the same keys as the flags")
    p.add_argument("--model", choices=("skipping", "coding", "joint", "base"))
    p.add_argument("--lambda", dest="lam", help="total rate, value or start:stop:steps")
    p.add_argument("--lambda1")
    p.add_argument("--lambda2")
    p.add_argument("--total", type=float, help="fix lambda1 + lambda2 (lambda2 = total - lambda1)")
    p.add_argument("--d")
    p.add_argument("--theta", help=f"value, start:stop:steps or {OPTIMAL!r}")
    p.add_argument("--mu", type=float)
    p.add_argument("--resolution", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="optimal threshold and maximal gain")
    p.add_argument("--model", choices=("skipping", "joint"), default="skipping")
    _add_point_flags(p)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--extended", action="store_true", help="include coded-dispatch mass in the joint model")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="discrete-event simulation")
    p.add_argument("--policy", choices=[x.value for x in Policy], default="base")
    _add_point_flags(p)
    _add_sim_flags(p, arrivals=100_000, replications=10)
    p.add_argument("--json", action="store_true", help="print the full estimate as JSON")
    p.add_argument("--trace", help="write a per-event trace of one extra replication to this file")
    p.add_argument("--trace-events", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="simulation vs analytic model at 99%% confidence")
    p.add_argument("--grid", choices=sorted(GRIDS), default="coding")
    _add_sim_flags(p, arrivals=1_000_000, replications=20)
    p.add_argument("--extended", action="store_true", help="compare the joint policy with the extended model")
    p.add_argument("--corrupt", type=float, default=None, help=argparse.SUPPRESS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc)
    except DomainError as exc:
        return _fail("domain", exc)
    except ConfigError as exc:
        return _fail("config", exc)
    except OSError as exc:
        return _fail("io", exc)


if __name__ == "__main__":
    sys.exit(main())
