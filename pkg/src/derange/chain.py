"""Samplers for theta-biased derangements.

Three routes to a random derangement of {1, ..., n} weighted by
theta ** (number of cycles):

* ``chain``   - a non-homogeneous two-state Markov chain emits a 0/1 sequence
  (the ``EtaSequence``) whose gaps between 1s are the cycle lengths in the
  order generated, starting from an artificial boundary above position n.
  No rejection, Theta(n) time per sample.
* ``feller``  - independent Bernoulli spacings produce a random permutation's
  cycle structure; samples containing a fixed point are rejected.  The
  acceptance rate is lambda_n(theta), which decays like exp(-theta).
* ``poisson`` - independent Poisson cycle counts, exponentially tilted so that
  their weighted sum concentrates on n, accepted when the sum hits n exactly.

Single-sample functions here are straightforward reference implementations.
Batch sampling routes through a compiled kernel (or its numpy twin) selected
in :mod:`derange.backend`; both backends consume the random stream in the
same order, so batch results are bit-identical across them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backend
from .exact import CycleType, LambdaTable, ModelParams, lambda_table, rising_factorial_log

__all__ = [
    "EtaSequence",
    "OrderedCycleLengths",
    "TransitionRow",
    "TiltSolution",
    "DerangementSample",
    "RngStream",
    "BatchResult",
    "MaxAttemptsError",
    "transition_row",
    "emit_probabilities",
    "sample_eta",
    "eta_to_lengths",
    "sample_feller_rejection",
    "solve_tilt",
    "tilted_means",
    "conditioned_poisson_acceptance",
    "conditioned_poisson_acceptance_asymptotic",
    "sample_conditioned_poisson",
    "size_biased_order",
    "realize_permutation",
    "permutation_from_type",
    "sample_lengths_batch",
]

# Default rejection budget, counted in elementary random draws.
DEFAULT_MAX_DRAWS = 10**9


class MaxAttemptsError(RuntimeError):
    """A rejection sampler ran out of its draw budget."""

    def __init__(self, requested: int, accepted: int, attempts: int):
        self.requested = requested
        self.accepted = accepted
        self.attempts = attempts
        super().__init__(
            f"rejection budget exhausted: {accepted}/{requested} samples "
            f"after {attempts} attempts"
        )


@dataclass(frozen=True)
class EtaSequence:
    """The chain's 0/1 output (eta_n, ..., eta_1) with implicit boundary 1s.

    Valid sequences have eta_n = 0, eta_1 = 1 and no two adjacent 1s; reading
    the string 1 eta_n ... eta_1, the gaps between consecutive 1s are the
    ordered cycle lengths of an n-derangement.
    """

    n: int
    bits: tuple

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need n >= 2")
        if len(self.bits) != self.n:
            raise ValueError(f"expected {self.n} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")
        if self.bits[0] != 0:
            raise ValueError("eta_n must be 0")
        if self.bits[-1] != 1:
            raise ValueError("eta_1 must be 1")
        for a, b in zip(self.bits, self.bits[1:]):
            if a == 1 and b == 1:
                raise ValueError("adjacent 1s are not allowed")

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> "EtaSequence":
        n = sum(int(a) for a in lengths)
        bits = [0] * n
        pos = n + 1
        for a in lengths:
            pos -= int(a)
            bits[n - pos] = 1  # bits index k holds eta_{n-k}
        return cls(n=n, bits=tuple(bits))

    def ones_positions(self) -> tuple:
        """Positions i with eta_i = 1, descending; always ends with 1."""
        return tuple(self.n - k for k, b in enumerate(self.bits) if b)

    def to_lengths(self) -> "OrderedCycleLengths":
        prev = self.n + 1
        out = []
        for pos in self.ones_positions():
            out.append(prev - pos)
            prev = pos
        return OrderedCycleLengths(lengths=tuple(out))

    def reversed(self) -> "EtaSequence":
        """The involution that reverses the order of the cycle lengths."""
        return EtaSequence.from_lengths(tuple(reversed(self.to_lengths().lengths)))


@dataclass(frozen=True)
class OrderedCycleLengths:
    """Cycle lengths in generation order; all >= 2, summing to n."""

    lengths: tuple

    def __post_init__(self) -> None:
        if not self.lengths:
            raise ValueError("need at least one cycle")
        if any(int(a) < 2 for a in self.lengths):
            raise ValueError("cycle lengths must be >= 2")

    @property
    def n(self) -> int:
        return sum(self.lengths)

    @property
    def num_cycles(self) -> int:
        return len(self.lengths)

    def cycle_type(self) -> CycleType:
        return CycleType.from_lengths(self.lengths)


def eta_to_lengths(eta: EtaSequence) -> OrderedCycleLengths:
    return eta.to_lengths()


@dataclass(frozen=True)
class TransitionRow:
    """One chain step: distribution of eta_r given eta_{r+1} = 0.

    From state 1 the next bit is forced to 0, so only the state-0 row is
    free.  p_stay0 + p_emit1 == 1 exactly by construction.
    """

    r: int
    p_stay0: float
    p_emit1: float


def transition_row(table: LambdaTable, r: int) -> TransitionRow:
    """The chain's transition row for emitting eta_r, 1 <= r <= table.n_max.

    The same ratio formula covers the deterministic boundary rows: r = 2
    forces 0 and r = 1 forces 1.
    """
    if r < 1 or r > table.n_max:
        raise ValueError(f"r={r} outside table range 1..{table.n_max}")
    theta = table.theta
    stay = (theta + r - 1) * table[r]
    emit = theta * table[r - 1]
    p_emit1 = emit / (stay + emit)
    return TransitionRow(r=r, p_stay0=1.0 - p_emit1, p_emit1=p_emit1)


def emit_probabilities(table: LambdaTable, n: int) -> np.ndarray:
    """P(emit 1 at position i | state 0), indexed by position i = 0..n-1.

    Only entries 3..n-1 are ever consumed by the chain; the rest are padding
    kept so callers can index by position directly.
    """
    if n > table.n_max:
        raise ValueError("lambda table too short")
    p = np.zeros(n, dtype=np.float64)
    for i in range(1, n):
        p[i] = transition_row(table, i).p_emit1
    return p


@dataclass(frozen=True)
class RngStream:
    """Reproducible named random stream.

    (seed, stream_id) keys a counter-based Philox generator, so distinct
    stream_ids give independent streams and the same pair always reproduces
    the same draws.  Phases carve one stream into independent regions (bulk
    sampling vs auxiliary randomization) via counter jumps.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or not isinstance(self.stream_id, int):
            raise ValueError("seed and stream_id must be integers")
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be >= 0")

    def philox(self, phase: int = 0) -> np.random.Philox:
        mask = (1 << 64) - 1
        key = np.array([self.seed & mask, self.stream_id & mask], dtype=np.uint64)
        bg = np.random.Philox(key=key)
        if phase:
            bg = bg.jumped(phase)
        return bg

    def generator(self, phase: int = 0) -> np.random.Generator:
        return np.random.Generator(self.philox(phase))

    def child(self, offset: int) -> "RngStream":
        return RngStream(seed=self.seed, stream_id=self.stream_id + offset)


# ---------------------------------------------------------------------------
# Reference single-sample implementations


def sample_eta(params: ModelParams, rng: np.random.Generator) -> EtaSequence:
    """Draw one EtaSequence by running the chain from position n down to 1.

    One uniform is consumed per step at positions n-1 down to 3, including
    forced steps where it is discarded, so repeated calls on one generator
    walk the stream exactly like the batch kernels do.
    """
    n, theta = params.n, params.theta_float
    table = lambda_table(theta, n)
    bits = [0]  # eta_n is forced to 0 by the boundary
    prev = 0
    for i in range(n - 1, 2, -1):
        u = rng.random()
        if prev == 1:
            bit = 0
        else:
            bit = 1 if u < transition_row(table, i).p_emit1 else 0
        bits.append(bit)
        prev = bit
    if n >= 3:
        bits.append(0)  # eta_2 is forced whatever the state
    bits.append(1)  # eta_1
    return EtaSequence(n=n, bits=tuple(bits))


def _lengths_from_one_positions(n: int, ones_desc: Sequence[int]) -> tuple:
    prev = n + 1
    out = []
    for pos in ones_desc:
        out.append(prev - pos)
        prev = pos
    return tuple(out)


def sample_feller_rejection(
    params: ModelParams,
    rng: np.random.Generator,
    max_attempts: Optional[int] = None,
):
    """Rejection-sample one derangement from independent Bernoulli spacings.

    Draws xi_i ~ Bernoulli(theta / (theta + i - 1)) for i = 2..n and accepts
    when the string 1 xi_2 ... xi_n 1 contains no two adjacent 1s (no spacing
    of length 1, i.e. no fixed point).  Returns (sample, attempts).
    """
    n, theta = params.n, params.theta_float
    if max_attempts is None:
        max_attempts = max(1, DEFAULT_MAX_DRAWS // max(1, n - 1))
    for attempt in range(1, max_attempts + 1):
        ones = [1]  # xi_1 is 1 with probability theta/theta = 1
        prev = 1
        ok = True
        for i in range(2, n + 1):
            # all n-1 spacings are drawn even once rejection is certain,
            # mirroring the batch kernels' stream discipline
            xi = 1 if rng.random() < theta / (theta + i - 1) else 0
            if xi and prev:
                ok = False
            if xi:
                ones.append(i)
            prev = xi
        if prev == 1:
            ok = False  # xi_n adjacent to the closing boundary 1
        if ok:
            lengths = _lengths_from_one_positions(n, tuple(reversed(ones)))
            ordered = OrderedCycleLengths(lengths=lengths)
            sample = DerangementSample(
                cycle_type=ordered.cycle_type(), ordered_lengths=ordered
            )
            return sample, attempt
    raise MaxAttemptsError(requested=1, accepted=0, attempts=max_attempts)


# ---------------------------------------------------------------------------
# Exponential tilt for the conditioned-Poisson sampler


@dataclass(frozen=True)
class TiltSolution:
    """Root c of theta * (1 - exp(-c)) = c and the induced speedup.

    c is the nonzero root for theta != 1 (negative below 1, positive above)
    and 0 at theta = 1.  The per-length damping factor x = exp(-c/n) depends
    on n and is computed on demand.
    """

    theta: float
    c: float
    log_speedup: float

    @property
    def speedup(self) -> float:
        return math.exp(self.log_speedup)

    def x(self, n: int) -> float:
        return math.exp(-self.c / n)

    @property
    def residual(self) -> float:
        return self.theta * (1.0 - math.exp(-self.c)) - self.c


def _tilt_integral_series(c: float) -> float:
    """sum_{k>=1} (-1)^(k+1) c^k / (k k!), the integral term of the speedup exponent."""
    if c == 0.0:
        return 0.0
    total = 0.0
    power = 1.0  # c^k / k!
    for k in range(1, 500):
        power *= c / k
        term = power / k
        total += term if k % 2 else -term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and k > 3:
            break
    return total


def solve_tilt(theta: float, tol: float = 1e-14, max_iter: int = 200) -> TiltSolution:
    """Solve theta * (1 - exp(-c)) = c for the nonzero tilt c.

    Safeguarded Newton iteration inside an analytic bracket, falling back to
    bisection whenever a Newton step leaves the bracket.  At theta = 1 the
    only root is c = 0 (no tilt needed).
    """
    theta = float(theta)
    if not math.isfinite(theta) or theta <= 0.0:
        raise ValueError("theta must be finite and > 0")
    if theta == 1.0:
        return TiltSolution(theta=theta, c=0.0, log_speedup=0.0)

    def g(c: float) -> float:
        return theta * (1.0 - math.exp(-c)) - c

    def gprime(c: float) -> float:
        return theta * math.exp(-c) - 1.0

    # g has a single maximum at c = ln(theta); the nonzero root lies beyond it.
    if theta > 1.0:
        lo, hi = math.log(theta), theta  # g(lo) > 0 > g(hi)
    else:
        lo, hi = -60.0, math.log(theta)  # g(lo) < 0 < g(hi)

    c = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val = g(c)
        if theta > 1.0:
            if val > 0.0:
                lo = c
            else:
                hi = c
        else:
            if val < 0.0:
                lo = c
            else:
                hi = c
        dv = gprime(c)
        step_ok = dv != 0.0
        if step_ok:
            c_new = c - val / dv
            step_ok = lo < c_new < hi
        if not step_ok:
            c_new = 0.5 * (lo + hi)
        if abs(c_new - c) <= tol * max(1.0, abs(c_new)):
            c = c_new
            break
        c = c_new
    u = -c + theta * _tilt_integral_series(c)
    return TiltSolution(theta=theta, c=c, log_speedup=u)


def tilted_means(params: ModelParams, tilt: TiltSolution) -> np.ndarray:
    """Poisson means theta * x^j / j for j = 2..n (index 0 holds j = 2)."""
    n, theta = params.n, params.theta_float
    j = np.arange(2, n + 1, dtype=np.float64)
    return theta * np.exp(-tilt.c * j / n) / j


def conditioned_poisson_acceptance(params: ModelParams, tilt: TiltSolution) -> float:
    """Exact acceptance probability of the tilted conditioned-Poisson sampler.

    P(sum_j j Z_j = n) with Z_j ~ Poisson(theta x^j / j) equals
    x^n exp(-theta sum_{j=2}^n x^j / j) * lambda_n(theta) theta_(n) / n!.
    """
    n, theta = params.n, params.theta_float
    table = lambda_table(theta, n)
    j = np.arange(2, n + 1, dtype=np.float64)
    xsum = float(np.sum(np.exp(-tilt.c * j / params.n) / j))
    log_p = (
        -tilt.c
        - theta * xsum
        + math.log(table[n])
        + rising_factorial_log(theta, n)
        - math.lgamma(n + 1)
    )
    return math.exp(log_p)


def conditioned_poisson_acceptance_asymptotic(params: ModelParams, tilt: TiltSolution) -> float:
    """Large-n acceptance approximation exp(-gamma theta + u(c)) / (n Gamma(theta))."""
    from .exact import EULER_GAMMA

    n, theta = params.n, params.theta_float
    return math.exp(
        -EULER_GAMMA * theta + tilt.log_speedup - math.log(n) - math.lgamma(theta)
    )


def size_biased_order(lengths: Sequence[int], rng: np.random.Generator) -> tuple:
    """Order a multiset of cycle lengths the way the chain would emit them.

    Successively picks a cycle with probability proportional to its length
    among those remaining (mass-biased sampling without replacement).  This
    is exactly the conditional law of the chain's generation order given the
    multiset of lengths.
    """
    remaining = [int(a) for a in lengths]
    out = []
    while len(remaining) > 1:
        total = sum(remaining)
        u = rng.random() * total
        acc = 0.0
        pick = len(remaining) - 1
        for idx, a in enumerate(remaining):
            acc += a
            if u < acc:
                pick = idx
                break
        out.append(remaining.pop(pick))
    out.extend(remaining)
    return tuple(out)


def sample_conditioned_poisson(
    params: ModelParams,
    rng: np.random.Generator,
    tilt: Optional[TiltSolution] = None,
    max_attempts: Optional[int] = None,
):
    """Rejection-sample one derangement from tilted independent Poisson counts.

    Z_j ~ Poisson(theta x^j / j) for j = 2..n, accepted when sum j Z_j == n.
    The accepted counts are the cycle type; the generation order is then
    recovered by size-biased ordering.  Returns (sample, attempts).
    """
    n = params.n
    if tilt is None:
        tilt = solve_tilt(params.theta_float)
    if max_attempts is None:
        max_attempts = max(1, DEFAULT_MAX_DRAWS // max(1, n - 1))
    mu = tilted_means(params, tilt)
    j_values = np.arange(2, n + 1)
    for attempt in range(1, max_attempts + 1):
        z = rng.poisson(mu)
        if int(np.dot(j_values, z)) != n:
            continue
        lengths = np.repeat(j_values, z)
        ordered = OrderedCycleLengths(lengths=size_biased_order(lengths, rng))
        sample = DerangementSample(
            cycle_type=ordered.cycle_type(), ordered_lengths=ordered
        )
        return sample, attempt
    raise MaxAttemptsError(requested=1, accepted=0, attempts=max_attempts)


# ---------------------------------------------------------------------------
# Permutation realization


@dataclass(frozen=True)
class DerangementSample:
    """One sampled derangement: its cycle type, generation order, and
    optionally a concrete permutation realization."""

    cycle_type: CycleType
    ordered_lengths: Optional[OrderedCycleLengths] = None
    permutation: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.ordered_lengths is not None:
            if self.ordered_lengths.cycle_type() != self.cycle_type:
                raise ValueError("ordered_lengths disagree with cycle_type")


def realize_permutation(
    lengths, rng: np.random.Generator
) -> np.ndarray:
    """Fill ordered cycle lengths with uniformly chosen elements.

    The first cycle starts at 1; every later cycle starts at the smallest
    unused integer; each remaining slot is filled by an element drawn
    uniformly from the unused pool.  With lengths drawn in chain order this
    produces exactly the theta-biased derangement law on permutations.

    Returns the one-line form as a 1-based int64 array: entry i-1 is the
    image of i.
    """
    if isinstance(lengths, OrderedCycleLengths):
        lengths = lengths.lengths
    lengths = [int(a) for a in lengths]
    n = sum(lengths)
    perm = np.zeros(n + 1, dtype=np.int64)
    pool = list(range(2, n + 1))  # kept sorted; pool[0] is the smallest unused
    first = True
    for a in lengths:
        start = 1 if first else pool.pop(0)
        first = False
        prev = start
        for _ in range(a - 1):
            m = len(pool)
            idx = int(rng.random() * m)
            if idx == m:
                idx = m - 1
            nxt = pool.pop(idx)
            perm[prev] = nxt
            prev = nxt
        perm[prev] = start
    return perm[1:]


def permutation_from_type(
    cycle_type: CycleType, rng: np.random.Generator
) -> np.ndarray:
    """Uniform random permutation with the given cycle type.

    Shuffles 1..n and cuts the ordering into consecutive blocks of the given
    lengths; each block becomes one cycle.  Every permutation of the type
    arises from the same number of orderings, hence uniformity.  Combined
    with a type drawn from the derangement law this reproduces the full
    permutation law, since that law depends on the permutation only through
    its number of cycles.
    """
    n = cycle_type.n
    order = rng.permutation(n) + 1
    perm = np.zeros(n + 1, dtype=np.int64)
    pos = 0
    for a in cycle_type.lengths():
        block = order[pos : pos + a]
        pos += a
        for u, v in zip(block, np.roll(block, -1)):
            perm[u] = v
    return perm[1:]


# ---------------------------------------------------------------------------
# Batch sampling through the selected kernel backend


@dataclass
class BatchResult:
    """Ragged batch of sampled cycle-length rows.

    Row k is lengths[offsets[k]:offsets[k+1]].  For the chain and feller
    methods rows are in generation order; for poisson they are ascending
    unless ordered=True requested size-biased reordering.  attempts holds a
    per-row rejection count for the rejection methods (all ones for chain);
    total_attempts counts every attempt including the rejected ones.
    """

    method: str
    n: int
    theta: float
    lengths: np.ndarray
    offsets: np.ndarray
    attempts: Optional[np.ndarray]
    total_attempts: int
    ordered: bool

    @property
    def reps(self) -> int:
        return len(self.offsets) - 1

    def row(self, k: int) -> np.ndarray:
        return self.lengths[self.offsets[k] : self.offsets[k + 1]]

    def num_cycles(self) -> np.ndarray:
        return np.diff(self.offsets)

    def acceptance_rate(self) -> float:
        return self.reps / self.total_attempts


def _poisson_cdf_tables(mu: np.ndarray, tail: float = 1e-18):
    """Per-length Poisson CDF tables for inversion sampling, flattened."""
    tables = []
    for m in mu:
        m = float(m)
        pmf = math.exp(-m)
        cum = pmf
        row = [cum]
        k = 0
        while 1.0 - cum > tail and k < 400:
            k += 1
            pmf *= m / k
            cum += pmf
            row.append(cum)
        tables.append(np.array(row, dtype=np.float64))
    offsets = np.zeros(len(tables) + 1, dtype=np.int64)
    for i, t in enumerate(tables):
        offsets[i + 1] = offsets[i] + len(t)
    flat = np.concatenate(tables) if tables else np.zeros(0)
    return flat, offsets


def sample_lengths_batch(
    params: ModelParams,
    method: str,
    reps: int,
    stream: RngStream,
    *,
    ordered: bool = True,
    max_draws: int = DEFAULT_MAX_DRAWS,
    backend_name: Optional[str] = None,
) -> BatchResult:
    """Draw `reps` derangement samples as a ragged batch of cycle lengths.

    The stream is consumed in a fixed order shared by both kernel backends,
    so (seed, stream_id) fully determines the result.  Auxiliary
    randomization (size-biased reordering for the poisson method) reads from
    a jumped phase of the same stream and never interferes with the bulk
    draws.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n, theta = params.n, params.theta_float
    kern = backend.kernels(backend_name)
    bitgen = stream.philox(phase=0)

    if method == "chain":
        table = lambda_table(theta, n)
        p_pos = emit_probabilities(table, n)
        # column c of the draw matrix is position i = n-1-c
        pcols = p_pos[np.arange(n - 1, 2, -1)] if n >= 4 else np.zeros(0)
        lengths, offsets = kern.chain_batch(bitgen, np.ascontiguousarray(pcols), n, reps)
        return BatchResult(
            method=method,
            n=n,
            theta=theta,
            lengths=lengths,
            offsets=offsets,
            attempts=None,
            total_attempts=reps,
            ordered=True,
        )

    if method == "feller":
        i = np.arange(2, n + 1, dtype=np.float64)
        pcols = theta / (theta + i - 1.0)
        max_attempts = max(1, max_draws // max(1, n - 1))
        lengths, offsets, attempts, total = kern.feller_batch(
            bitgen, np.ascontiguousarray(pcols), n, reps, max_attempts
        )
        accepted = len(offsets) - 1
        if accepted < reps:
            raise MaxAttemptsError(requested=reps, accepted=accepted, attempts=total)
        return BatchResult(
            method=method,
            n=n,
            theta=theta,
            lengths=lengths,
            offsets=offsets,
            attempts=attempts,
            total_attempts=total,
            ordered=True,
        )

    if method == "poisson":
        tilt = solve_tilt(theta)
        mu = tilted_means(params, tilt)
        cdf_flat, cdf_offs = _poisson_cdf_tables(mu)
        max_attempts = max(1, max_draws // max(1, n - 1))
        lengths, offsets, attempts, total = kern.poisson_batch(
            bitgen, cdf_flat, cdf_offs, n, reps, max_attempts
        )
        accepted = len(offsets) - 1
        if accepted < reps:
            raise MaxAttemptsError(requested=reps, accepted=accepted, attempts=total)
        if ordered:
            aux = stream.generator(phase=1)
            lengths = _reorder_rows_size_biased(lengths, offsets, aux)
        return BatchResult(
            method=method,
            n=n,
            theta=theta,
            lengths=lengths,
            offsets=offsets,
            attempts=attempts,
            total_attempts=total,
            ordered=ordered,
        )

    raise ValueError(f"unknown method {method!r}; expected chain, feller or poisson")


def _reorder_rows_size_biased(
    lengths: np.ndarray, offsets: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    out = np.empty_like(lengths)
    for k in range(len(offsets) - 1):
        lo, hi = offsets[k], offsets[k + 1]
        if hi - lo <= 1:
            out[lo:hi] = lengths[lo:hi]
        else:
            out[lo:hi] = size_biased_order(lengths[lo:hi], rng)
    return out
