"""Command-line surface: budget arithmetic, solving, searching, baselines,
oracle verification, and multi-strategy comparison reports.

Exit codes: 0 success, 2 infeasible, 64 usage, 65 malformed data,
69 evaluator failure. All randomness flows from --seed through the
documented PRNG; reruns with identical inputs produce identical outputs
(compare's wall_time_s column is the one measured, non-replayable value).
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time
from pathlib import Path

from .baselines import gmp_profile, uniform_profile
from .core import (
    TimingTable,
    discretize,
    load_timing_table,
    parse_skip_spec,
    profile_time,
    time_budget,
)
from .dp import DpSolution, brute_force, solve_dp
from .error_models import (
    load_error_table,
    load_sensitivity,
    load_weight_stats,
    quadratic_errors,
)
from .evaluators import DEFAULT_EVAL_TIMEOUT, Evaluator, spawn_external
from .exceptions import (
    EnumerationCapError,
    EvaluationError,
    InfeasibleError,
    MalformedInputError,
    ValidationError,
)
from .search import (
    GaParams,
    SearchParams,
    direct_search,
    genetic_search,
    nominal_evaluations,
    spdy_search,
)
from .testbed import additive_loss, coupled_loss, load_loss_spec

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_EVALUATOR = 69

COMPARE_STRATEGIES = ("spdy", "direct", "ga", "uniform", "gmp")
SUMMARY_CSV_HEADER = "strategy,seed,final_score,evals,wall_time_s"
CONVERGENCE_CSV_HEADER = "strategy,seed,eval_index,best_score"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _solution_doc(sol: DpSolution, timing: TimingTable) -> dict:
    return sol.to_dict(
        sparsities=sol.profile.sparsities(timing.grid),
        total_time_s=profile_time(sol.profile, timing),
    )


def _make_evaluator(spec: str, timing: TimingTable, timeout: float) -> Evaluator:
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise ValidationError(
            f"evaluator spec {spec!r} must look like additive:FILE, coupled:FILE, or exec:COMMAND"
        )
    if kind in ("additive", "coupled"):
        loss_spec = load_loss_spec(rest)
        if loss_spec.num_layers != timing.num_layers:
            raise ValidationError(
                f"loss spec covers {loss_spec.num_layers} layers, timing table has {timing.num_layers}"
            )
        factory = additive_loss if kind == "additive" else coupled_loss
        return factory(loss_spec, timing.grid)
    if kind == "exec":
        return spawn_external(shlex.split(rest), timing.layer_names, timing.grid, timeout=timeout)
    raise ValidationError(f"unknown evaluator kind {kind!r}")


def _load_errors(args, timing: TimingTable):
    if (args.errors is None) == (args.quadratic is None):
        raise ValidationError("provide exactly one of an errors file or --quadratic")
    if args.errors is not None:
        table = load_error_table(args.errors, expected_levels=len(timing.grid))
    else:
        table = quadratic_errors(load_sensitivity(args.quadratic), timing.grid)
    if table.num_layers != timing.num_layers:
        raise ValidationError(
            f"error table covers {table.num_layers} layers, timing table has {timing.num_layers}"
        )
    return table


# --- command handlers --------------------------------------------------------

def cmd_budget(args) -> int:
    timing = load_timing_table(args.timing)
    tb = time_budget(timing, args.speedup)
    _emit({"seconds": tb.seconds, "speedup": args.speedup})
    return EXIT_OK


def cmd_solve(args) -> int:
    timing = load_timing_table(args.timing)
    skip = parse_skip_spec(args.skip, timing.num_layers)
    err = _load_errors(args, timing)
    tb = time_budget(timing, args.speedup)
    dt = discretize(timing, tb, args.buckets)
    sol = solve_dp(err, dt, skip, args.buckets)
    _emit(_solution_doc(sol, timing))
    return EXIT_OK


def cmd_oracle(args) -> int:
    timing = load_timing_table(args.timing)
    skip = parse_skip_spec(args.skip, timing.num_layers)
    err = _load_errors(args, timing)
    tb = time_budget(timing, args.speedup)
    dt = discretize(timing, tb, args.buckets)
    sol = brute_force(err, dt, skip, args.buckets)
    _emit(_solution_doc(sol, timing))
    return EXIT_OK


def cmd_search(args) -> int:
    timing = load_timing_table(args.timing)
    skip = parse_skip_spec(args.skip, timing.num_layers)
    tb = time_budget(timing, args.speedup)
    params = SearchParams(
        k=args.k,
        shrink_fraction=args.shrink,
        seed=args.seed,
        eval_budget=args.eval_budget,
        early_stop=args.early_stop,
        buckets=args.buckets,
        use_cache=not args.no_cache,
    )
    evaluator = _make_evaluator(args.evaluator, timing, args.timeout)
    try:
        c_star, sol, trace = spdy_search(evaluator, timing, tb, timing.grid, skip, params)
    finally:
        evaluator.close()
    doc = _solution_doc(sol, timing)
    doc["c_star"] = [float(x) for x in c_star.coeffs]
    if args.trace is not None:
        _write_atomic(Path(args.trace), trace.to_csv())
    _emit(doc)
    return EXIT_OK


def cmd_baseline(args) -> int:
    timing = load_timing_table(args.timing)
    skip = parse_skip_spec(args.skip, timing.num_layers)
    tb = time_budget(timing, args.speedup)
    if args.strategy == "uniform":
        sol = uniform_profile(timing, tb, timing.grid, skip)
    else:
        if args.stats is None:
            raise ValidationError("--strategy gmp requires --stats")
        stats = load_weight_stats(args.stats)
        sol = gmp_profile(stats, timing, tb, timing.grid, skip)
    doc = _solution_doc(sol, timing)
    doc["strategy"] = args.strategy
    _emit(doc)
    return EXIT_OK


def _map_exit(e: Exception) -> int:
    if isinstance(e, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(e, MalformedInputError):
        return EXIT_DATA
    if isinstance(e, EvaluationError):
        return EXIT_EVALUATOR
    return EXIT_USAGE


def cmd_compare(args) -> int:
    timing = load_timing_table(args.timing)
    skip = parse_skip_spec(args.skip, timing.num_layers)
    tb = time_budget(timing, args.speedup)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    unknown = [s for s in strategies if s not in COMPARE_STRATEGIES]
    if not strategies or unknown:
        raise ValidationError(
            f"strategies must be a comma list from {','.join(COMPARE_STRATEGIES)}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nominal = nominal_evaluations(
        SearchParams(k=args.k, shrink_fraction=args.shrink), timing.num_layers
    )
    stats = load_weight_stats(args.stats) if args.stats is not None else None
    evaluator = _make_evaluator(args.evaluator, timing, args.timeout)

    summary_lines = [SUMMARY_CSV_HEADER]
    convergence_lines = [CONVERGENCE_CSV_HEADER]
    completed: list[str] = []
    failures: dict[str, str] = {}
    first_error: Exception | None = None

    def run_one(strategy: str, seed: int):
        """Returns (profile, final_score, evals, trace-or-None)."""
        if strategy == "spdy":
            params = SearchParams(
                k=args.k, shrink_fraction=args.shrink, seed=seed,
                eval_budget=nominal, buckets=args.buckets,
            )
            _c, sol, trace = spdy_search(evaluator, timing, tb, timing.grid, skip, params)
            return sol.profile, trace.best_score, trace.underlying_evals, trace
        if strategy == "direct":
            params = SearchParams(
                k=args.k, shrink_fraction=args.shrink, seed=seed,
                eval_budget=nominal, buckets=args.buckets,
            )
            profile, trace = direct_search(evaluator, timing, tb, timing.grid, skip, params)
            return profile, trace.best_score, trace.underlying_evals, trace
        if strategy == "ga":
            params = GaParams(
                seed=seed, eval_budget=int(2.5 * nominal), generations=None,
                buckets=args.buckets,
            )
            profile, trace = genetic_search(evaluator, timing, tb, timing.grid, skip, params)
            return profile, trace.best_score, trace.underlying_evals, trace
        if strategy == "uniform":
            sol = uniform_profile(timing, tb, timing.grid, skip)
        else:
            if stats is None:
                raise ValidationError("strategy gmp requires --stats")
            sol = gmp_profile(stats, timing, tb, timing.grid, skip)
        return sol.profile, evaluator.evaluate(sol.profile), 0, None

    try:
        for strategy in strategies:
            seeds = [args.seed] if strategy in ("uniform", "gmp") else [
                args.seed + i for i in range(args.seeds)
            ]
            try:
                for seed in seeds:
                    t0 = time.perf_counter()
                    profile, final_score, evals, trace = run_one(strategy, seed)
                    wall = time.perf_counter() - t0
                    summary_lines.append(
                        f"{strategy},{seed},{final_score!r},{evals},{wall!r}"
                    )
                    if trace is not None:
                        _write_atomic(out / f"trace_{strategy}_seed{seed}.csv", trace.to_csv())
                        for row in trace.rows:
                            convergence_lines.append(
                                f"{strategy},{seed},{row.eval_index},{row.best_score!r}"
                            )
                completed.append(strategy)
            except (InfeasibleError, EvaluationError, ValidationError, MalformedInputError) as e:
                failures[strategy] = str(e)
                if first_error is None:
                    first_error = e
    finally:
        evaluator.close()

    _write_atomic(out / "summary.csv", "\n".join(summary_lines) + "\n")
    _write_atomic(out / "convergence.csv", "\n".join(convergence_lines) + "\n")
    _emit({"out_dir": str(out), "completed": completed, "failed": failures})
    if completed:
        return EXIT_OK
    return _map_exit(first_error) if first_error is not None else EXIT_USAGE


# --- parser ------------------------------------------------------------------

def _add_common(sp, skip_default="first,last"):
    sp.add_argument("timing", help="timing table JSON")
    sp.add_argument("--speedup", type=float, required=True, metavar="X",
                    help="target dense/sparse speedup factor (>= 1)")
    sp.add_argument("--skip", default=skip_default, metavar="SPEC",
                    help='layers pinned dense: "first,last", "none", or indices (default: %(default)s)')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sparseplan",
        description="Latency-constrained layer-wise sparsity profile optimizer.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("budget", help="print the layer-time budget for a speedup target")
    sp.add_argument("timing", help="timing table JSON")
    sp.add_argument("--speedup", type=float, required=True, metavar="X")
    sp.set_defaults(func=cmd_budget)

    sp = sub.add_parser("solve", help="optimal profile for an error table under the budget")
    _add_common(sp)
    sp.add_argument("errors", nargs="?", default=None, help="error table JSON")
    sp.add_argument("--quadratic", metavar="C_FILE", default=None,
                    help="sensitivity coefficients JSON; errors become c * (i/(|S|-1))^2")
    sp.add_argument("--buckets", type=int, default=10_000, metavar="B")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("oracle", help="exhaustive-enumeration solver (small instances only)")
    _add_common(sp)
    sp.add_argument("errors", nargs="?", default=None, help="error table JSON")
    sp.add_argument("--quadratic", metavar="C_FILE", default=None)
    sp.add_argument("--buckets", type=int, default=10_000, metavar="B")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("search", help="sensitivity-coefficient search against an evaluator")
    _add_common(sp)
    sp.add_argument("--evaluator", required=True, metavar="KIND:ARG",
                    help="additive:FILE | coupled:FILE | exec:COMMAND")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--k", type=int, default=100, help="trials per neighborhood size")
    sp.add_argument("--shrink", type=float, default=0.1, help="initial neighborhood fraction")
    sp.add_argument("--buckets", type=int, default=10_000, metavar="B")
    sp.add_argument("--trace", metavar="OUT_CSV", default=None)
    sp.add_argument("--eval-budget", type=int, default=None, metavar="N",
                    help="cap on evaluations reaching the evaluator")
    sp.add_argument("--early-stop", action="store_true",
                    help="per neighborhood, stop after k consecutive non-improving trials")
    sp.add_argument("--no-cache", action="store_true", help="disable profile-score memoization")
    sp.add_argument("--timeout", type=float, default=DEFAULT_EVAL_TIMEOUT,
                    help="per-request timeout for exec evaluators (seconds)")
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("baseline", help="uniform or global-magnitude baseline profile")
    _add_common(sp)
    sp.add_argument("--strategy", choices=("uniform", "gmp"), required=True)
    sp.add_argument("--stats", metavar="STATS_JSON", default=None,
                    help="weight statistics (required for gmp)")
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("compare", help="run strategies under equal evaluation budgets")
    _add_common(sp)
    sp.add_argument("--evaluator", required=True, metavar="KIND:ARG")
    sp.add_argument("--strategies", default="spdy,direct,ga,uniform,gmp")
    sp.add_argument("--seeds", type=int, default=5, help="number of seeds per search strategy")
    sp.add_argument("--seed", type=int, default=0, help="base seed")
    sp.add_argument("--k", type=int, default=100)
    sp.add_argument("--shrink", type=float, default=0.1)
    sp.add_argument("--buckets", type=int, default=10_000, metavar="B")
    sp.add_argument("--stats", metavar="STATS_JSON", default=None)
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--timeout", type=float, default=DEFAULT_EVAL_TIMEOUT)
    sp.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    try:
        return args.func(args)
    except InfeasibleError as e:
        return _fail(EXIT_INFEASIBLE, e)
    except MalformedInputError as e:
        return _fail(EXIT_DATA, e)
    except EnumerationCapError as e:
        return _fail(EXIT_USAGE, e)
    except ValidationError as e:
        return _fail(EXIT_USAGE, e)
    except EvaluationError as e:
        return _fail(EXIT_EVALUATOR, e)


def _fail(code: int, e: Exception) -> int:
    print(f"error: {e}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
