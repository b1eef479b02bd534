"""Command-line entry point: ``admitfair {validate,solve,check,simulate,fit,report}``.

Exit codes: 0 success, 1 domain failure (JSON diagnostics on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Mapping, Sequence

from . import io
from .errors import AdmitFairError
from .fitter import FitProblem, fit
from .gamma import ScoreScale
from .montecarlo import simulate
from .population import POOR, RICH, URM, NON_URM, validate_theorem_setting
from .procedures import PLUS_FACTOR, PROCEDURES, QUOTA, solve
from .theorems import check_theorem

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class _Failure(Exception):
    """Domain-level failure carrying a machine-readable payload."""

    def __init__(self, payload: Mapping[str, Any]):
        super().__init__(payload.get("message", ""))
        self.payload = dict(payload)


def _emit(doc: Mapping[str, Any], out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(io.dumps(doc))
    else:
        io.write_json(doc, out)


def _diagnose(payload: Mapping[str, Any]) -> None:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def _load(args) -> io.PopulationFile:
    return io.load_population_file(args.population)


def _capacity(args, loaded: io.PopulationFile) -> float:
    g = args.capacity if args.capacity is not None else loaded.capacity
    if g is None:
        raise _Failure({"error": "MissingCapacity", "message": "no capacity in the population file; pass --capacity"})
    return g


def _cmd_validate(args) -> int:
    loaded = _load(args)
    pop = loaded.population
    setting = set(pop.groups) == {URM, NON_URM} and set(pop.regions) == {POOR, RICH}
    violations = validate_theorem_setting(pop, loaded.capacity) if setting else []
    doc = io.result_document(
        "validate",
        {
            "population": io.population_to_dict(pop, loaded.capacity),
            "theorem_setting": setting,
            "violations": [{"code": v.code, "detail": v.detail} for v in violations],
            "all_hold": setting and not violations,
        },
    )
    _emit(doc, args.out)
    if not doc["all_hold"]:
        raise _Failure(
            {
                "error": "AssumptionViolation",
                "message": "population does not satisfy the two-group, two-region assumptions",
                "theorem_setting": setting,
                "violations": doc["violations"],
            }
        )
    return EXIT_OK


def _cmd_solve(args) -> int:
    loaded = _load(args)
    g = _capacity(args, loaded)
    outcome = solve(loaded.population, g, args.procedure, args.eta)
    doc = io.result_document(
        "solve",
        {
            "population": io.population_to_dict(loaded.population, loaded.capacity),
            "eta": args.eta,
            "outcome": io.outcome_to_dict(outcome),
        },
    )
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_check(args) -> int:
    loaded = _load(args)
    g = _capacity(args, loaded)
    report = check_theorem(loaded.population, g, args.theorem, args.eta)
    doc = io.result_document(
        "check",
        {
            "population": io.population_to_dict(loaded.population, loaded.capacity),
            "g": g,
            "eta": args.eta,
            "theorem": io.theorem_report_to_dict(report),
        },
    )
    _emit(doc, args.out)
    if not report.passed:
        raise _Failure(
            {
                "error": "TheoremNotEstablished",
                "message": f"theorem {args.theorem} status: {report.status}",
                "status": report.status,
                "preconditions_met": dict(report.preconditions_met),
            }
        )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    loaded = _load(args)
    g = _capacity(args, loaded)
    outcome = solve(loaded.population, g, args.procedure, args.eta)
    sim = simulate(loaded.population, outcome, args.seed, args.replication, args.threads)
    doc = io.result_document(
        "simulate",
        {
            "population": io.population_to_dict(loaded.population, loaded.capacity),
            "eta": args.eta,
            "outcome": io.outcome_to_dict(outcome),
            "simulation": io.simulation_to_dict(sim),
        },
    )
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_fit(args) -> int:
    stats = io.parse_summary_stats(args.stats_groups, args.stats_quantiles, ScoreScale(args.s_min, args.s_max))
    problem = FitProblem(
        stats,
        num_regions=args.regions,
        restarts=args.restarts,
        rng_seed=args.seed,
        max_evals=args.max_evals,
    )
    solution = fit(problem, threads=args.threads)
    _emit(io.result_document("fit", {"solution": io.fit_solution_to_dict(solution, stats, problem)}), args.out)
    return EXIT_OK


def _cmd_report(args) -> int:
    bundle = io.build_report(io.read_json(args.input), where=args.input)
    if args.out == "-":
        sys.stdout.write(io.dumps(io.report_to_dict(bundle)))
    else:
        io.emit_report(bundle, args.out)
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="admitfair", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    threads_default = os.cpu_count() or 1

    def population_args(p, out_required=True):
        p.add_argument("--population", required=True, help="population JSON document")
        p.add_argument("--capacity", type=float, help="seat count g (overrides the file)")
        p.add_argument("--out", required=out_required, help="output path, '-' for stdout")

    p = sub.add_parser("validate", help="check the two-group, two-region assumptions")
    p.add_argument("--population", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("solve", help="solve thresholds for one procedure")
    population_args(p)
    p.add_argument("--procedure", required=True, choices=PROCEDURES)
    p.add_argument("--eta", type=float, help="quota eta or plus-factor eta_dagger")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("check", help="check a theorem on the population")
    population_args(p)
    p.add_argument("--theorem", required=True, type=int, choices=(1, 2, 3))
    p.add_argument("--eta", type=float, help="quota eta (theorem 1) or eta_dagger (theorem 2)")
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("simulate", help="Monte Carlo replay of a procedure")
    population_args(p)
    p.add_argument("--procedure", required=True, choices=PROCEDURES)
    p.add_argument("--eta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replication", type=_positive_int, default=1)
    p.add_argument("--threads", type=_positive_int, default=threads_default)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("fit", help="fit region distributions to summary statistics")
    p.add_argument("--stats-groups", required=True, help="CSV with group, applicants, admits")
    p.add_argument("--stats-quantiles", required=True, help="CSV with gpa_cut and at-or-above fractions")
    p.add_argument("--regions", type=_positive_int, default=3)
    p.add_argument("--restarts", type=_positive_int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-evals", type=_positive_int, default=20_000)
    p.add_argument("--s-min", type=float, default=0.0)
    p.add_argument("--s-max", type=float, default=4.0)
    p.add_argument("--threads", type=_positive_int, default=threads_default)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("report", help="plot-ready bundle from a result document")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_report)
    return parser


def _check_eta_usage(parser: argparse.ArgumentParser, args) -> None:
    if args.command in ("solve", "simulate"):
        needs = args.procedure in (QUOTA, PLUS_FACTOR)
        what = f"--procedure {args.procedure}"
    elif args.command == "check":
        needs = args.theorem in (1, 2)
        what = f"--theorem {args.theorem}"
    else:
        return
    if needs and args.eta is None:
        parser.error(f"{what} requires --eta")
    if not needs and args.eta is not None:
        parser.error(f"{what} does not take --eta")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_eta_usage(parser, args)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except _Failure as exc:
        _diagnose(exc.payload)
    except (AdmitFairError, ValueError, OSError, ArithmeticError) as exc:
        _diagnose({"error": type(exc).__name__, "message": str(exc)})
    return EXIT_FAILURE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
