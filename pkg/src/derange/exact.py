"""Exact distribution theory for theta-biased derangements.

A permutation of {1, ..., n} is drawn with probability proportional to
theta ** (number of cycles), then conditioned on having no fixed point.
Everything here is closed form: the no-fixed-point probability lambda_n(theta),
factorial moments and marginal laws of the cycle counts, the law of the total
number of cycles, and the survival function of the first cycle length.

Computations run in log space (math.lgamma) so they stay finite for n in the
thousands.  The lambda sequence has two independent routes, a stable forward
recurrence and an alternating sum, which the test suite plays against each
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "LogWeight",
    "ModelParams",
    "LambdaTable",
    "CycleType",
    "AltSumResult",
    "rising_factorial_log",
    "lambda_sequence",
    "lambda_table",
    "lambda_altsum",
    "stirling_first_unsigned",
    "derangement_cycle_count",
    "factorial_moment",
    "mean_cycle_count",
    "cycle_count_pmf",
    "num_cycles_pmf",
    "num_cycles_mean",
    "single_cycle_prob",
    "single_cycle_asymptotic",
    "first_cycle_survival",
    "distinct_lengths_limit",
]

# Euler-Mascheroni constant, 20 significant digits.
EULER_GAMMA = 0.57721566490153286061

# Log-scale weight; kept as a bare float on purpose.
LogWeight = float

Theta = Union[float, int, Fraction]


@dataclass(frozen=True)
class ModelParams:
    """Problem size n and cycle-count bias theta.

    theta may be a Fraction, in which case downstream enumeration code can
    produce exact rational probabilities.  theta = 1 is the uniform
    derangement model.
    """

    n: int
    theta: Theta

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        t = float(self.theta)
        if not math.isfinite(t) or t <= 0.0:
            raise ValueError(f"theta must be finite and > 0, got {self.theta!r}")

    @property
    def theta_float(self) -> float:
        return float(self.theta)


def rising_factorial_log(theta: float, n: int) -> LogWeight:
    """log of theta * (theta+1) * ... * (theta+n-1), with the empty product = 1."""
    if n < 0:
        raise ValueError("rising factorial needs n >= 0")
    if n == 0:
        return 0.0
    theta = float(theta)
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    return math.lgamma(theta + n) - math.lgamma(theta)


def lambda_sequence(theta: Theta, n_max: int) -> list:
    """lambda_0 .. lambda_n_max by the forward recurrence.

    lambda_i is the probability that a theta-biased permutation of i elements
    has no fixed point.  The recurrence

        lambda_i = (i-1)/(theta+i-1) * (lambda_{i-1} + theta/(theta+i-2) * lambda_{i-2})

    runs entirely over positive quantities, so it is numerically stable.  The
    arithmetic follows the type of theta: pass a Fraction to get exact
    rationals, a float to get float64.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if theta <= 0:
        raise ValueError("theta must be > 0")
    one = theta ** 0
    vals = [one]
    if n_max >= 1:
        vals.append(one - one)
    for i in range(2, n_max + 1):
        if i == 2:
            vals.append(one / (theta + 1))
        else:
            prev = vals[i - 1] + theta / (theta + i - 2) * vals[i - 2]
            vals.append((i - 1) / (theta + i - 1) * prev)
    return vals


@dataclass(frozen=True)
class LambdaTable:
    """Immutable table of lambda_0(theta) .. lambda_n(theta)."""

    theta: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    @property
    def limit(self) -> float:
        """exp(-theta), the large-n limit of the entries."""
        return math.exp(-self.theta)


@lru_cache(maxsize=128)
def lambda_table(theta: float, n_max: int) -> LambdaTable:
    """Float64 lambda table, cached per (theta, n_max)."""
    theta = float(theta)
    if not math.isfinite(theta) or theta <= 0.0:
        raise ValueError("theta must be finite and > 0")
    vals = np.array(lambda_sequence(theta, n_max), dtype=np.float64)
    return LambdaTable(theta=theta, values=vals)


@dataclass(frozen=True)
class AltSumResult:
    """Outcome of the alternating-sum route to lambda_n."""

    value: float
    max_term_ratio: float
    reliable: bool


def lambda_altsum(theta: float, n: int, cancellation_limit: float = 1e12) -> AltSumResult:
    """lambda_n(theta) by the inclusion-exclusion alternating sum.

    Terms are accumulated in scaled log space with explicit signs.  When the
    largest intermediate term exceeds cancellation_limit times the result the
    answer has lost too many digits and `reliable` comes back False; callers
    should then trust the recurrence instead.
    """
    theta = float(theta)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return AltSumResult(1.0, 1.0, True)
    log_theta = math.log(theta)
    lg_top = math.lgamma(n + theta)
    lg_n1 = math.lgamma(n + 1)
    logs = np.empty(n + 1)
    for j in range(n + 1):
        logs[j] = (
            j * log_theta
            - math.lgamma(j + 1)
            + lg_n1
            - math.lgamma(n - j + 1)
            + math.lgamma(n + theta - j)
            - lg_top
        )
    peak = float(np.max(logs))
    signs = np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
    total = float(np.sum(signs * np.exp(logs - peak)))
    if total <= 0.0:
        # Completely cancelled; nothing trustworthy survives.
        return AltSumResult(0.0, math.inf, False)
    value = math.exp(peak + math.log(total))
    ratio = math.exp(peak - (peak + math.log(total)))
    return AltSumResult(value=value, max_term_ratio=ratio, reliable=ratio <= cancellation_limit)


@dataclass(frozen=True)
class CycleType:
    """Multiset of cycle lengths of an n-derangement, stored sparsely.

    counts is a sorted tuple of (length, multiplicity) pairs with every
    length >= 2 and sum(length * multiplicity) == n.  Instances are hashable
    so they can key tally dictionaries.
    """

    n: int
    counts: tuple

    def __post_init__(self) -> None:
        total = 0
        prev = 1
        for j, c in self.counts:
            if j < 2 or c < 1:
                raise ValueError(f"bad cycle type entry ({j}, {c})")
            if j <= prev:
                raise ValueError("cycle type entries must be sorted by length")
            prev = j
            total += j * c
        if total != self.n:
            raise ValueError(f"cycle lengths sum to {total}, expected n={self.n}")

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> "CycleType":
        tally: dict = {}
        for a in lengths:
            tally[int(a)] = tally.get(int(a), 0) + 1
        counts = tuple(sorted(tally.items()))
        return cls(n=sum(int(a) for a in lengths), counts=counts)

    @classmethod
    def from_counts(cls, n: int, counts: Mapping[int, int]) -> "CycleType":
        items = tuple(sorted((int(j), int(c)) for j, c in counts.items() if c))
        return cls(n=n, counts=items)

    @property
    def num_cycles(self) -> int:
        return sum(c for _, c in self.counts)

    def lengths(self) -> tuple:
        """All lengths, ascending, with multiplicity."""
        out = []
        for j, c in self.counts:
            out.extend([j] * c)
        return tuple(out)

    def count_of(self, j: int) -> int:
        for jj, c in self.counts:
            if jj == j:
                return c
        return 0

    @property
    def all_lengths_distinct(self) -> bool:
        return all(c == 1 for _, c in self.counts)


# ---------------------------------------------------------------------------
# Stirling numbers and derangement cycle-count coefficients


_STIRLING_ROWS: list = [[1]]


def stirling_first_unsigned(n: int, k: int) -> int:
    """Unsigned Stirling number of the first kind, exact integer."""
    if n < 0 or k < 0:
        raise ValueError("n and k must be >= 0")
    if k > n:
        return 0
    while len(_STIRLING_ROWS) <= n:
        m = len(_STIRLING_ROWS)
        prev = _STIRLING_ROWS[m - 1]
        row = [0] * (m + 1)
        for kk in range(1, m + 1):
            row[kk] = prev[kk - 1] + (m - 1) * (prev[kk] if kk <= m - 1 else 0)
        _STIRLING_ROWS.append(row)
    return _STIRLING_ROWS[n][k]


def derangement_cycle_count(n: int, k: int) -> int:
    """Number of derangements of n elements with exactly k cycles, exact.

    Inclusion-exclusion over forced fixed points:
        sum_l (-1)^l C(n, l) * |s(n-l, k-l)|
    Zero outside 1 <= k <= n // 2.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if k < 1 or k > n // 2:
        return 0
    total = 0
    for l in range(k + 1):
        term = math.comb(n, l) * stirling_first_unsigned(n - l, k - l)
        total += -term if l % 2 else term
    return total


# ---------------------------------------------------------------------------
# Moments and marginal laws


def _log_lambda(table: LambdaTable, i: int) -> float:
    v = table[i]
    if v <= 0.0:
        return -math.inf
    return math.log(v)


def factorial_moment(params: ModelParams, orders: Mapping[int, int]) -> float:
    """Joint falling-factorial moment E prod_j C_j^{(r_j)} of the cycle counts.

    orders maps cycle length j (>= 2) to the falling-factorial order r_j.
    The moment vanishes whenever sum(j * r_j) exceeds n, and also at
    sum(j * r_j) == n - 1 because a derangement cannot leave a single point
    over.
    """
    n, theta = params.n, params.theta_float
    m = 0
    log_prod = 0.0
    for j, r in orders.items():
        if j < 2:
            raise ValueError("cycle lengths must be >= 2")
        if r < 0:
            raise ValueError("orders must be >= 0")
        m += j * r
        log_prod += r * (math.log(theta) - math.log(j))
    if m > n:
        return 0.0
    table = lambda_table(theta, n)
    if table[n - m] == 0.0:
        return 0.0
    log_val = (
        math.lgamma(n + 1)
        - _log_lambda(table, n)
        - rising_factorial_log(theta, n)
        + _log_lambda(table, n - m)
        + rising_factorial_log(theta, n - m)
        - math.lgamma(n - m + 1)
        + log_prod
    )
    return math.exp(log_val)


def mean_cycle_count(params: ModelParams, j: int) -> float:
    """Expected number of cycles of length j."""
    return factorial_moment(params, {j: 1})


def cycle_count_pmf(params: ModelParams, j: int, r: int) -> float:
    """P(the derangement has exactly r cycles of length j).

    Recovered from the falling-factorial moments by the standard alternating
    inversion  p_r = (1/r!) sum_{i>=r} (-1)^{i-r} u_i / (i-r)!.
    """
    if j < 2:
        raise ValueError("cycle lengths must be >= 2")
    if r < 0:
        raise ValueError("r must be >= 0")
    n = params.n
    i_max = n // j
    if r > i_max:
        return 0.0
    total = 0.0
    for i in range(r, i_max + 1):
        u_i = factorial_moment(params, {j: i})
        term = u_i / (math.factorial(i - r) * math.factorial(r))
        total += -term if (i - r) % 2 else term
    if total < 0.0:
        if total < -1e-9:
            raise ArithmeticError(
                f"moment inversion lost precision: p({r}) = {total} at n={n}, j={j}"
            )
        total = 0.0
    return total


def num_cycles_pmf(params: ModelParams, k: int) -> float:
    """P(the derangement has exactly k cycles)."""
    n, theta = params.n, params.theta_float
    if k < 1 or k > n // 2:
        return 0.0
    d = derangement_cycle_count(n, k)
    table = lambda_table(theta, n)
    log_p = (
        k * math.log(theta)
        + math.log(d)
        - _log_lambda(table, n)
        - rising_factorial_log(theta, n)
    )
    return math.exp(log_p)


def num_cycles_mean(params: ModelParams) -> float:
    """Expected total number of cycles."""
    return sum(mean_cycle_count(params, j) for j in range(2, params.n + 1))


def single_cycle_prob(params: ModelParams) -> float:
    """P(the derangement is one single n-cycle), exact."""
    n, theta = params.n, params.theta_float
    table = lambda_table(theta, n)
    log_p = (
        math.lgamma(n + 1)
        - rising_factorial_log(theta, n)
        + math.log(theta)
        - math.log(n)
        - _log_lambda(table, n)
    )
    return math.exp(log_p)


def single_cycle_asymptotic(params: ModelParams) -> float:
    """Large-n approximation Gamma(theta+1) * (e/n)^theta to the single-cycle probability."""
    n, theta = params.n, params.theta_float
    return math.exp(math.lgamma(theta + 1.0) + theta * (1.0 - math.log(n)))


def first_cycle_survival(params: ModelParams, l: int) -> float:
    """P(A_1 > l): the cycle containing the chain's starting boundary is longer than l.

    A_1 is the first cycle length generated by the sampling chain; its
    survival function is a product of the chain's stay-at-zero probabilities.
    """
    n, theta = params.n, params.theta_float
    if l < 0 or l > n:
        raise ValueError("need 0 <= l <= n")
    if l == 0:
        return 1.0
    table = lambda_table(theta, n)
    prob = 1.0
    for r in range(n - l + 1, n):
        num = (theta + r - 1) * table[r]
        den = num + theta * table[r - 1]
        prob *= num / den
    return prob


def mean_first_cycle_length(params: ModelParams) -> float:
    """E[A_1], the expected length of the first cycle in generation order.

    Summing the survival function avoids forming the pmf; the product inside
    first_cycle_survival is extended one factor per term rather than
    recomputed, so the whole expectation costs O(n).
    """
    n, theta = params.n, params.theta_float
    table = lambda_table(theta, n)
    total = 2.0  # the l = 0 and l = 1 terms; cycles are never shorter than 2
    prob = 1.0
    for l in range(2, n):
        r = n - l + 1  # the factor gained when extending from l-1 to l
        num = (theta + r - 1) * table[r]
        prob *= num / (num + theta * table[r - 1])
        total += prob
    return total


def distinct_lengths_limit(theta: float) -> float:
    """Large-n limit of P(all cycle lengths are distinct)."""
    theta = float(theta)
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    return math.exp(-theta * (EULER_GAMMA - 1.0) - math.lgamma(theta + 2.0))
