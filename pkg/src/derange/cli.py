"""Command line interface.

Subcommands:

* ``exact lambda``  - the no-fixed-point weight lambda_n(theta)
* ``exact pmf``     - cycle-count, number-of-cycles, or single-cycle pmf values
* ``sample``        - draw derangements and emit them as JSONL or CSV
* ``estimate``      - Monte Carlo estimate of a named statistic
* ``table``         - rebuild one of the reference tables (ids 1-6, 8, 9)
* ``verify``        - run the exhaustive small-n oracle suite
* ``bench``         - time the sampling methods and kernel backends

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 rejection
budget exhausted.  The DERANGE_SEED environment variable supplies a default
seed; --seed overrides it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .chain import (
    MaxAttemptsError,
    RngStream,
    realize_permutation,
    sample_lengths_batch,
)
from .exact import (
    ModelParams,
    cycle_count_pmf,
    lambda_altsum,
    lambda_table,
    num_cycles_pmf,
    single_cycle_prob,
)
from .harness import (
    STATISTICS,
    TABLE_IDS,
    benchmark_backends,
    benchmark_methods,
    estimate,
    reproduce_table,
)
from .oracle import run_verification_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_MAX_ATTEMPTS = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("DERANGE_SEED", "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"DERANGE_SEED must be an integer, got {raw!r}")


def _add_model_args(p, reps_default: Optional[int] = None) -> None:
    p.add_argument("--theta", type=float, required=True, help="cycle-count bias theta > 0")
    p.add_argument("--n", type=int, required=True, help="derangement size n >= 2")
    if reps_default is not None:
        p.add_argument("--reps", type=int, default=reps_default, help="number of samples")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default: DERANGE_SEED or 0)")


def build_parser() -> _Parser:
    parser = _Parser(prog="derange", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_exact = sub.add_parser("exact", help="exact probability computations")
    sub_exact = p_exact.add_subparsers(dest="exact_command", required=True)

    p_lambda = sub_exact.add_parser("lambda", help="no-fixed-point weight lambda_n(theta)")
    _add_model_args(p_lambda)
    p_lambda.add_argument(
        "--method", choices=("recurrence", "altsum"), default="recurrence",
        help="forward recurrence (default) or alternating-sum evaluation",
    )

    p_pmf = sub_exact.add_parser("pmf", help="pmf values of cycle-count functionals")
    p_pmf.add_argument(
        "--what", choices=("cycle-count", "num-cycles", "single-cycle"), required=True,
        help="which functional: P(count of j-cycles = r), P(number of cycles = r), or P(single cycle)",
    )
    _add_model_args(p_pmf)
    p_pmf.add_argument("--j", type=int, default=None, help="cycle length j (cycle-count only)")
    p_pmf.add_argument("--r", type=int, default=None, help="count r, or number of cycles")

    p_sample = sub.add_parser("sample", help="draw derangements")
    p_sample.add_argument("--method", choices=("chain", "feller", "poisson"), default="chain")
    _add_model_args(p_sample, reps_default=1)
    p_sample.add_argument("--emit", choices=("lengths", "counts", "permutation"), default="lengths")
    p_sample.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_sample.add_argument("--max-draws", type=int, default=10**9, help="rejection draw budget")
    p_sample.add_argument("--backend", choices=("cython", "python"), default=None)

    p_est = sub.add_parser("estimate", help="Monte Carlo estimate of a statistic")
    p_est.add_argument("--stat", required=True, metavar="NAME",
                       help="one of: " + ", ".join(sorted(STATISTICS)))
    p_est.add_argument("--method", choices=("chain", "feller", "poisson"), default="chain")
    _add_model_args(p_est, reps_default=100_000)
    p_est.add_argument("--workers", type=int, default=1, help="worker streams to split reps over")
    p_est.add_argument("--max-draws", type=int, default=10**10)
    p_est.add_argument("--backend", choices=("cython", "python"), default=None)

    p_table = sub.add_parser("table", help="rebuild a reference table")
    p_table.add_argument("--id", type=int, required=True, dest="table_id",
                         help="table id in 1-6, 8 or 9 (there is no table 7)")
    p_table.add_argument("--reps", type=int, default=None, help="samples per cell (default per table)")
    p_table.add_argument("--seed", type=int, default=None)
    p_table.add_argument("--format", choices=("csv", "md"), default="md")
    p_table.add_argument("--timing", action="store_true", help="include wall-clock timing columns")
    p_table.add_argument("--workers", type=int, default=1)
    p_table.add_argument("--backend", choices=("cython", "python"), default=None)

    p_verify = sub.add_parser("verify", help="run the exhaustive oracle suite")
    p_verify.add_argument("--max-n", type=int, default=12, help="enumeration size cap")
    p_verify.add_argument("--theta-list", type=float, nargs="+", default=[0.5, 1.0, 5.0])

    p_bench = sub.add_parser("bench", help="time sampling methods and backends")
    p_bench.add_argument("--theta", type=float, default=1.0)
    p_bench.add_argument("--n", type=int, default=250)
    p_bench.add_argument("--reps", type=int, default=20_000)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--methods", nargs="+", default=["chain", "feller", "poisson"],
                         choices=("chain", "feller", "poisson"))
    p_bench.add_argument("--compare-backends", action="store_true",
                         help="time every available kernel backend instead of just the default")

    return parser


def _cmd_exact_lambda(args) -> int:
    params = ModelParams(n=args.n, theta=args.theta)
    if args.method == "recurrence":
        value = lambda_table(params.theta_float, params.n)[params.n]
    else:
        result = lambda_altsum(params.theta_float, params.n)
        value = result.value
        if not result.reliable:
            print(
                f"warning: alternating sum is unreliable here "
                f"(cancellation ratio {result.max_term_ratio:.2e}); "
                f"use --method recurrence",
                file=sys.stderr,
            )
    print(f"{value:.15g}")
    return EXIT_OK


def _cmd_exact_pmf(args) -> int:
    params = ModelParams(n=args.n, theta=args.theta)
    if args.what == "cycle-count":
        if args.j is None or args.r is None:
            raise ValueError("--what cycle-count needs both --j and --r")
        value = cycle_count_pmf(params, args.j, args.r)
    elif args.what == "num-cycles":
        if args.r is None:
            raise ValueError("--what num-cycles needs --r")
        value = num_cycles_pmf(params, args.r)
    else:
        value = single_cycle_prob(params)
    print(f"{value:.15g}")
    return EXIT_OK


def _counts_pairs(row) -> list:
    counts = {}
    for a in row:
        counts[int(a)] = counts.get(int(a), 0) + 1
    return [[j, c] for j, c in sorted(counts.items())]


def _cmd_sample(args) -> int:
    params = ModelParams(n=args.n, theta=args.theta)
    seed = args.seed if args.seed is not None else _default_seed()
    stream = RngStream(seed=seed, stream_id=0)
    batch = sample_lengths_batch(
        params, args.method, args.reps, stream,
        ordered=True, max_draws=args.max_draws, backend_name=args.backend,
    )
    perm_gen = stream.generator(phase=2) if args.emit == "permutation" else None

    out = sys.stdout
    if args.format == "csv":
        if args.emit == "lengths":
            out.write("sample,lengths\n")
        elif args.emit == "counts":
            out.write("sample,counts\n")
        else:
            out.write("sample,lengths,perm\n")
    for k in range(batch.reps):
        row = batch.row(k)
        if args.format == "jsonl":
            if args.emit == "lengths":
                payload = {"lengths": [int(a) for a in row]}
            elif args.emit == "counts":
                payload = {"counts": _counts_pairs(row)}
            else:
                perm = realize_permutation(row, perm_gen)
                payload = {"lengths": [int(a) for a in row], "perm": [int(v) for v in perm]}
            out.write(json.dumps(payload) + "\n")
        else:
            if args.emit == "lengths":
                out.write(f"{k}," + " ".join(str(int(a)) for a in row) + "\n")
            elif args.emit == "counts":
                out.write(f"{k}," + " ".join(f"{j}:{c}" for j, c in _counts_pairs(row)) + "\n")
            else:
                perm = realize_permutation(row, perm_gen)
                out.write(
                    f"{k}," + " ".join(str(int(a)) for a in row)
                    + "," + " ".join(str(int(v)) for v in perm) + "\n"
                )
    return EXIT_OK


def _cmd_estimate(args) -> int:
    params = ModelParams(n=args.n, theta=args.theta)
    seed = args.seed if args.seed is not None else _default_seed()
    result = estimate(
        args.stat, params, args.method, args.reps, RngStream(seed=seed, stream_id=0),
        workers=args.workers, max_draws=args.max_draws, backend_name=args.backend,
    )
    print(json.dumps(result.to_dict(), indent=2))
    return EXIT_OK


def _cmd_table(args) -> int:
    if args.table_id not in TABLE_IDS:
        raise ValueError(f"table id must be one of {TABLE_IDS} (there is no table 7)")
    seed = args.seed if args.seed is not None else _default_seed()
    result = reproduce_table(
        args.table_id, reps=args.reps, seed=seed,
        include_timing=args.timing, workers=args.workers, backend_name=args.backend,
    )
    sys.stdout.write(result.to_csv() if args.format == "csv" else result.to_markdown())
    return EXIT_OK


def _cmd_verify(args) -> int:
    reports = run_verification_suite(max_n=args.max_n, thetas=args.theta_list)
    failed = 0
    for r in reports:
        status = "ok " if r.passed else "FAIL"
        print(f"{status} {r.name:<20} checks={r.checks:<6} max_err={r.max_error:.3e}  {r.detail}")
        failed += 0 if r.passed else 1
    total = len(reports)
    print(f"{total - failed}/{total} verifications passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def _cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    params = ModelParams(n=args.n, theta=args.theta)
    if args.compare_backends:
        rows = benchmark_backends(params, args.reps, seed=seed, methods=args.methods)
    else:
        rows = benchmark_methods([(args.n, args.theta)], args.reps, seed=seed, methods=args.methods)
    print(f"{'method':<10} {'backend':<8} {'n':>5} {'theta':>6} {'reps':>8} "
          f"{'seconds':>9} {'us/sample':>10} {'accept':>8}")
    for r in rows:
        print(f"{r.method:<10} {r.backend:<8} {r.n:>5} {r.theta:>6g} {r.reps:>8} "
              f"{r.seconds:>9.3f} {r.micros_per_sample:>10.2f} {r.acceptance_rate:>8.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "exact":
            if args.exact_command == "lambda":
                return _cmd_exact_lambda(args)
            return _cmd_exact_pmf(args)
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "table":
            return _cmd_table(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "bench":
            return _cmd_bench(args)
        raise ValueError(f"unknown command {args.command!r}")
    except MaxAttemptsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAX_ATTEMPTS
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
