"""Monte Carlo harness: statistics, estimation, reference tables, benchmarks.

The harness turns ragged batches of sampled cycle lengths into summary
statistics with standard errors, reproduces the package's built-in reference
tables (ids 1-6, 8, 9), and times the samplers.  Estimation can fan out over
worker streams; partial sums are merged commutatively, so a result depends
only on (seed, reps, worker count), never on scheduling order.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import backend as backend_mod
from .chain import (
    BatchResult,
    RngStream,
    conditioned_poisson_acceptance_asymptotic,
    sample_lengths_batch,
    solve_tilt,
)
from .exact import (
    ModelParams,
    distinct_lengths_limit,
    lambda_table,
    single_cycle_asymptotic,
    single_cycle_prob,
)

__all__ = [
    "StatisticDef",
    "STATISTICS",
    "statistic_values",
    "EstimateResult",
    "estimate",
    "TableResult",
    "reproduce_table",
    "table_from_json",
    "table_from_csv",
    "TABLE_IDS",
    "BenchmarkRow",
    "benchmark_methods",
    "benchmark_backends",
]


# ---------------------------------------------------------------------------
# Per-sample statistics on ragged batches


@dataclass(frozen=True)
class StatisticDef:
    """One summary statistic: a per-row functional of the cycle lengths.

    kind "probability" marks 0/1-valued statistics whose standard error uses
    the binomial formula; "mean" statistics use the sample standard error.
    requires_order marks functionals of the generation order, which need
    batches whose rows are ordered (the poisson method must reorder).
    """

    name: str
    kind: str
    requires_order: bool
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]


def _row_index(offsets: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))


def _mark_rows(reps: int, rows: np.ndarray) -> np.ndarray:
    mark = np.zeros(reps, dtype=bool)
    mark[rows] = True
    return mark


def _stat_single_cycle(lengths, offsets):
    return (np.diff(offsets) == 1).astype(np.float64)


def _stat_num_cycles(lengths, offsets):
    return np.diff(offsets).astype(np.float64)


def _stat_distinct(lengths, offsets):
    reps = len(offsets) - 1
    rows = _row_index(offsets)
    order = np.lexsort((lengths, rows))
    s = lengths[order]
    r = rows[order]
    dup = (r[1:] == r[:-1]) & (s[1:] == s[:-1])
    return (~_mark_rows(reps, r[1:][dup])).astype(np.float64)


def _stat_all_odd(lengths, offsets):
    reps = len(offsets) - 1
    rows = _row_index(offsets)
    return (~_mark_rows(reps, rows[lengths % 2 == 0])).astype(np.float64)


def _stat_all_even(lengths, offsets):
    reps = len(offsets) - 1
    rows = _row_index(offsets)
    return (~_mark_rows(reps, rows[lengths % 2 == 1])).astype(np.float64)


def _stat_first_len(lengths, offsets):
    return lengths[offsets[:-1]].astype(np.float64)


def _stat_longest_len(lengths, offsets):
    return np.maximum.reduceat(lengths, offsets[:-1]).astype(np.float64)


def _stat_first_is_longest(lengths, offsets):
    return (_stat_first_len(lengths, offsets) == _stat_longest_len(lengths, offsets)).astype(np.float64)


def _adjacent_violation(lengths, offsets, increasing: bool):
    reps = len(offsets) - 1
    rows = _row_index(offsets)
    same = rows[1:] == rows[:-1]
    if increasing:
        viol = same & (lengths[1:] < lengths[:-1])
    else:
        viol = same & (lengths[1:] > lengths[:-1])
    return (~_mark_rows(reps, rows[1:][viol])).astype(np.float64)


STATISTICS: Dict[str, StatisticDef] = {
    s.name: s
    for s in [
        StatisticDef("single_cycle", "probability", False, _stat_single_cycle),
        StatisticDef("distinct_lengths", "probability", False, _stat_distinct),
        StatisticDef("all_odd", "probability", False, _stat_all_odd),
        StatisticDef("all_even", "probability", False, _stat_all_even),
        StatisticDef("first_is_longest", "probability", True, _stat_first_is_longest),
        StatisticDef("mean_first_cycle", "mean", True, _stat_first_len),
        StatisticDef("mean_longest_cycle", "mean", False, _stat_longest_len),
        StatisticDef("weakly_decreasing", "probability", True, lambda l, o: _adjacent_violation(l, o, False)),
        StatisticDef("weakly_increasing", "probability", True, lambda l, o: _adjacent_violation(l, o, True)),
        StatisticDef("num_cycles_mean", "mean", False, _stat_num_cycles),
    ]
}


def statistic_values(batch: BatchResult, name: str) -> np.ndarray:
    """Per-row values of one statistic over a batch."""
    stat = STATISTICS.get(name)
    if stat is None:
        raise ValueError(f"unknown statistic {name!r}; have {sorted(STATISTICS)}")
    if stat.requires_order and not batch.ordered:
        raise ValueError(f"statistic {name!r} needs an ordered batch")
    return stat.fn(batch.lengths, batch.offsets)


# ---------------------------------------------------------------------------
# Estimation with worker streams


@dataclass(frozen=True)
class EstimateResult:
    """Monte Carlo estimate of one statistic with its standard error."""

    statistic: str
    point: float
    std_error: float
    reps: int
    seed: int
    wall_seconds: float
    method: str
    n: int
    theta: float
    workers: int = 1
    acceptance_rate: float = 1.0
    total_attempts: int = 0
    backend: str = ""

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "point": self.point,
            "std_error": self.std_error,
            "reps": self.reps,
            "seed": self.seed,
            "wall_seconds": self.wall_seconds,
            "method": self.method,
            "n": self.n,
            "theta": self.theta,
            "workers": self.workers,
            "acceptance_rate": self.acceptance_rate,
            "total_attempts": self.total_attempts,
            "backend": self.backend,
        }


def _split_reps(reps: int, workers: int) -> List[int]:
    base, extra = divmod(reps, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


@dataclass
class _CellSums:
    """Commutative accumulator for per-statistic sums across workers."""

    reps: int = 0
    s1: Dict[str, float] = field(default_factory=dict)
    s2: Dict[str, float] = field(default_factory=dict)
    total_attempts: int = 0
    sample_seconds: float = 0.0

    def add_batch(self, batch: BatchResult, stats: Sequence[str], seconds: float) -> None:
        self.reps += batch.reps
        self.total_attempts += batch.total_attempts
        self.sample_seconds += seconds
        for name in stats:
            vals = statistic_values(batch, name)
            # values are integer-valued, so these sums are exact in float64
            self.s1[name] = self.s1.get(name, 0.0) + float(vals.sum())
            self.s2[name] = self.s2.get(name, 0.0) + float((vals * vals).sum())

    def point(self, name: str) -> float:
        return self.s1[name] / self.reps

    def std_error(self, name: str) -> float:
        kind = STATISTICS[name].kind
        m = self.point(name)
        if kind == "probability":
            return math.sqrt(max(m * (1.0 - m), 0.0) / self.reps)
        if self.reps < 2:
            return float("nan")
        var = (self.s2[name] - self.s1[name] ** 2 / self.reps) / (self.reps - 1)
        return math.sqrt(max(var, 0.0) / self.reps)

    def acceptance(self) -> float:
        return self.reps / self.total_attempts if self.total_attempts else 1.0


def _sample_cell(
    params: ModelParams,
    method: str,
    reps: int,
    seed: int,
    base_stream_id: int,
    workers: int,
    stats: Sequence[str],
    *,
    ordered: Optional[bool] = None,
    max_draws: Optional[int] = None,
    backend_name: Optional[str] = None,
) -> _CellSums:
    """Sample one (params, method) cell across worker streams and accumulate."""
    if ordered is None:
        ordered = any(STATISTICS[s].requires_order for s in stats)
    sums = _CellSums()
    kwargs = {}
    if max_draws is not None:
        kwargs["max_draws"] = max_draws
    for w, reps_w in enumerate(_split_reps(reps, workers)):
        if reps_w == 0:
            continue
        stream = RngStream(seed=seed, stream_id=base_stream_id + w)
        t0 = time.perf_counter()
        batch = sample_lengths_batch(
            params, method, reps_w, stream,
            ordered=ordered, backend_name=backend_name, **kwargs,
        )
        seconds = time.perf_counter() - t0
        sums.add_batch(batch, stats, seconds)
    return sums


def estimate(
    statistic: str,
    params: ModelParams,
    method: str,
    reps: int,
    rng: RngStream,
    *,
    workers: int = 1,
    max_draws: Optional[int] = None,
    backend_name: Optional[str] = None,
) -> EstimateResult:
    """Monte Carlo estimate of one named statistic.

    reps samples are drawn with the given method (for the rejection methods,
    reps counts accepted samples).  With workers > 1 the reps are split
    across consecutive stream ids starting at rng.stream_id; merging uses
    commutative exact sums, so the result is a function of (seed, reps,
    workers) alone.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; have {sorted(STATISTICS)}")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    t0 = time.perf_counter()
    sums = _sample_cell(
        params, method, reps, rng.seed, rng.stream_id, workers, [statistic],
        max_draws=max_draws, backend_name=backend_name,
    )
    wall = time.perf_counter() - t0
    return EstimateResult(
        statistic=statistic,
        point=sums.point(statistic),
        std_error=sums.std_error(statistic),
        reps=sums.reps,
        seed=rng.seed,
        wall_seconds=wall,
        method=method,
        n=params.n,
        theta=params.theta_float,
        workers=workers,
        acceptance_rate=sums.acceptance(),
        total_attempts=sums.total_attempts,
        backend=backend_name or backend_mod.backend_name(),
    )


# ---------------------------------------------------------------------------
# Reference tables


TABLE_IDS = (1, 2, 3, 4, 5, 6, 8, 9)

_DEFAULT_REPS = {1: 10_000, 2: 10_000, 3: 10_000, 4: 100_000, 5: 100_000,
                 6: 100_000, 8: 100_000, 9: 100_000}

_THETAS = (0.5, 1.0, 5.0)
_NS = (10, 50, 250)

_TABLE_TITLES = {
    1: "Bernoulli-spacings rejection sampler: run time, acceptance rate, and the exact no-fixed-point weight",
    2: "Tilted conditioned-Poisson sampler: run time, acceptance rate, and the asymptotic acceptance approximation",
    3: "Sequential chain sampler: run time across theta",
    4: "Probability that the derangement is a single cycle: simulated, exact, and asymptotic",
    5: "Probability that all cycle lengths are distinct",
    6: "Probability that all cycle lengths are odd (alpha) or all even (beta)",
    8: "First-generated versus longest cycle: P(first is longest) and the mean lengths of both",
    9: "Probability that the generated cycle lengths are weakly decreasing or weakly increasing",
}


def _fmt_prob(x: float) -> str:
    if x == 0.0:
        return "0.000"
    if abs(x) >= 1e-3:
        return f"{x:.3f}"
    return f"{x:.2e}"


def _fmt_mean(x: float) -> str:
    return f"{x:.2f}"


def _fmt_time(x: float) -> str:
    return f"{x:.3f}"


@dataclass
class TableResult:
    """One reproduced reference table, fully formatted.

    rows hold display strings (empty string = blank cell).  When
    include_timing is False, timing cells are blank and elapsed_seconds is
    None, making the rendered output byte-identical across runs with the
    same (seed, reps, workers, backend).
    """

    table_id: int
    title: str
    columns: List[str]
    rows: List[List[str]]
    notes: List[str]
    reps: int
    seed: int
    workers: int
    include_timing: bool
    elapsed_seconds: Optional[float] = None

    def to_markdown(self) -> str:
        header = "| " + " | ".join(self.columns) + " |"
        sep = "|" + "|".join(["---"] * len(self.columns)) + "|"
        body = ["| " + " | ".join(r) + " |" for r in self.rows]
        lines = [f"**{self.title}**", ""] + [header, sep] + body
        for note in self.notes:
            lines.append("")
            lines.append(f"_{note}_")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(r) for r in self.rows)
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "table_id": self.table_id,
            "title": self.title,
            "columns": self.columns,
            "rows": self.rows,
            "notes": self.notes,
            "reps": self.reps,
            "seed": self.seed,
            "workers": self.workers,
            "include_timing": self.include_timing,
        }
        if self.include_timing:
            payload["elapsed_seconds"] = self.elapsed_seconds
        return json.dumps(payload, indent=2) + "\n"


def table_from_json(text: str) -> TableResult:
    d = json.loads(text)
    return TableResult(
        table_id=d["table_id"],
        title=d["title"],
        columns=list(d["columns"]),
        rows=[list(r) for r in d["rows"]],
        notes=list(d["notes"]),
        reps=d["reps"],
        seed=d["seed"],
        workers=d["workers"],
        include_timing=d["include_timing"],
        elapsed_seconds=d.get("elapsed_seconds"),
    )


def table_from_csv(text: str) -> Tuple[List[str], List[List[str]]]:
    lines = [ln for ln in text.splitlines() if ln != ""]
    columns = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return columns, rows


def reproduce_table(
    table_id: int,
    reps: Optional[int] = None,
    seed: int = 0,
    *,
    include_timing: bool = False,
    workers: int = 1,
    backend_name: Optional[str] = None,
) -> TableResult:
    """Rebuild one reference table from fresh simulations.

    Valid ids are 1-6, 8 and 9 (there is no table 7).  Cell sampling order
    is fixed, and each sampled cell k uses stream ids
    k*workers .. k*workers + workers - 1 of the given seed, so results are
    reproducible cell by cell.
    """
    if table_id not in TABLE_IDS:
        raise ValueError(f"table id must be one of {TABLE_IDS}, got {table_id}")
    if reps is None:
        reps = _DEFAULT_REPS[table_id]
    t_start = time.perf_counter()

    cell_counter = [0]

    def cell(params, method, stats, ordered=None, max_draws=None):
        k = cell_counter[0]
        cell_counter[0] += 1
        return _sample_cell(
            params, method, reps, seed, k * workers, workers, stats,
            ordered=ordered, max_draws=max_draws, backend_name=backend_name,
        )

    def t_cell(sums) -> str:
        return _fmt_time(sums.sample_seconds) if include_timing else ""

    columns: List[str]
    rows: List[List[str]] = []
    notes: List[str] = []

    if table_id in (1, 2):
        method = "feller" if table_id == 1 else "poisson"
        columns = ["n"]
        for th in _THETAS:
            columns += [f"theta={th:g} time_s", f"theta={th:g} accept", f"theta={th:g} theory"]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                params = ModelParams(n, th)
                sums = cell(params, method, [], ordered=False, max_draws=10**10)
                if table_id == 1:
                    theory = lambda_table(th, n)[n]
                else:
                    theory = conditioned_poisson_acceptance_asymptotic(params, solve_tilt(th))
                row += [t_cell(sums), _fmt_prob(sums.acceptance()), _fmt_prob(theory)]
            rows.append(row)
        notes.append(f"acceptance rates estimated from {reps} accepted samples per cell")
        if table_id == 2:
            cs = ", ".join(f"c({th:g})={solve_tilt(th).c:.3f}" for th in _THETAS)
            notes.append(f"tilt roots: {cs}")

    elif table_id == 3:
        columns = ["n"] + [f"theta={th:g} time_s" for th in _THETAS]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                sums = cell(ModelParams(n, th), "chain", [], ordered=True)
                row.append(t_cell(sums))
            rows.append(row)
        notes.append(f"run time to draw {reps} samples per cell with the chain sampler")

    elif table_id == 4:
        columns = ["n"]
        for th in _THETAS:
            columns += [f"theta={th:g} sim", f"theta={th:g} exact", f"theta={th:g} asymp"]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                params = ModelParams(n, th)
                sums = cell(params, "chain", ["single_cycle"])
                row += [
                    _fmt_prob(sums.point("single_cycle")),
                    _fmt_prob(single_cycle_prob(params)),
                    _fmt_prob(single_cycle_asymptotic(params)),
                ]
            rows.append(row)
        notes.append(f"simulated column from {reps} chain samples per cell")

    elif table_id == 5:
        columns = ["n"] + [f"theta={th:g}" for th in _THETAS]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                sums = cell(ModelParams(n, th), "chain", ["distinct_lengths"])
                row.append(_fmt_prob(sums.point("distinct_lengths")))
            rows.append(row)
        rows.append(["inf"] + [_fmt_prob(distinct_lengths_limit(th)) for th in _THETAS])
        notes.append(f"estimates from {reps} chain samples per cell; the last row is the large-n limit")

    elif table_id == 6:
        columns = ["n"]
        for th in _THETAS:
            columns += [f"theta={th:g} alpha", f"theta={th:g} beta"]
        for n in (10, 11, 50, 51, 250, 251):
            row = [str(n)]
            for th in _THETAS:
                sums = cell(ModelParams(n, th), "chain", ["all_odd", "all_even"])
                row.append(_fmt_prob(sums.point("all_odd")))
                # all-even is impossible at odd n; that cell is left blank
                row.append("" if n % 2 else _fmt_prob(sums.point("all_even")))
            rows.append(row)
        notes.append(f"estimates from {reps} chain samples per cell; beta is blank for odd n")

    elif table_id == 8:
        columns = ["n"]
        for th in _THETAS:
            columns += [f"theta={th:g} o", f"theta={th:g} mean_first", f"theta={th:g} mean_longest"]
        stats = ["first_is_longest", "mean_first_cycle", "mean_longest_cycle"]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                sums = cell(ModelParams(n, th), "chain", stats)
                row += [
                    _fmt_prob(sums.point("first_is_longest")),
                    _fmt_mean(sums.point("mean_first_cycle")),
                    _fmt_mean(sums.point("mean_longest_cycle")),
                ]
            rows.append(row)
        notes.append(f"estimates from {reps} chain samples per cell; o = P(first generated cycle is the longest)")

    else:  # table_id == 9
        columns = ["n"]
        for th in _THETAS:
            columns += [f"theta={th:g} decreasing", f"theta={th:g} increasing"]
        stats = ["weakly_decreasing", "weakly_increasing"]
        for n in _NS:
            row = [str(n)]
            for th in _THETAS:
                sums = cell(ModelParams(n, th), "chain", stats)
                row.append(_fmt_prob(sums.point("weakly_decreasing")))
                row.append(_fmt_prob(sums.point("weakly_increasing")))
            rows.append(row)
        notes.append(f"estimates from {reps} chain samples per cell")

    elapsed = time.perf_counter() - t_start
    return TableResult(
        table_id=table_id,
        title=_TABLE_TITLES[table_id],
        columns=columns,
        rows=rows,
        notes=notes,
        reps=reps,
        seed=seed,
        workers=workers,
        include_timing=include_timing,
        elapsed_seconds=elapsed if include_timing else None,
    )


# ---------------------------------------------------------------------------
# Benchmarks


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    backend: str
    n: int
    theta: float
    reps: int
    seconds: float
    micros_per_sample: float
    acceptance_rate: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "backend": self.backend,
            "n": self.n,
            "theta": self.theta,
            "reps": self.reps,
            "seconds": self.seconds,
            "micros_per_sample": self.micros_per_sample,
            "acceptance_rate": self.acceptance_rate,
        }


def _bench_once(params, method, reps, seed, backend_name, max_draws, repeats=3) -> BenchmarkRow:
    best = math.inf
    acc = 1.0
    for _ in range(repeats):
        stream = RngStream(seed=seed, stream_id=0)
        t0 = time.perf_counter()
        batch = sample_lengths_batch(
            params, method, reps, stream,
            ordered=False, backend_name=backend_name, max_draws=max_draws,
        )
        dt = time.perf_counter() - t0
        best = min(best, dt)
        acc = batch.acceptance_rate()
    return BenchmarkRow(
        method=method,
        backend=backend_name or backend_mod.backend_name(),
        n=params.n,
        theta=params.theta_float,
        reps=reps,
        seconds=best,
        micros_per_sample=1e6 * best / reps,
        acceptance_rate=acc,
    )


def benchmark_methods(
    grid: Sequence[Tuple[int, float]],
    reps: int,
    *,
    seed: int = 0,
    methods: Sequence[str] = ("chain", "feller", "poisson"),
    backend_name: Optional[str] = None,
    max_draws: int = 10**10,
) -> List[BenchmarkRow]:
    """Time each sampling method over a grid of (n, theta) cells.

    Uses the fastest of three runs per cell (fixed seed) to suppress timer
    noise.  reps counts accepted samples for the rejection methods, so their
    seconds reflect the acceptance rates.
    """
    out = []
    for n, theta in grid:
        params = ModelParams(n, theta)
        for method in methods:
            out.append(_bench_once(params, method, reps, seed, backend_name, max_draws))
    return out


def benchmark_backends(
    params: ModelParams,
    reps: int,
    *,
    seed: int = 0,
    methods: Sequence[str] = ("chain", "feller", "poisson"),
    max_draws: int = 10**10,
) -> List[BenchmarkRow]:
    """Time every available kernel backend on the same workload.

    Both backends draw identical samples for a given seed, so rows differ
    only in implementation speed.
    """
    out = []
    for name in backend_mod.available_backends():
        for method in methods:
            out.append(_bench_once(params, method, reps, seed, name, max_draws))
    return out
