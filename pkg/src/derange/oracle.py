"""Independent small-n oracles.

Everything here recomputes distributional facts by brute force or by a
different route than the production formulas, so the two can be compared in
tests:

* cycle-type probabilities by enumerating partitions and normalizing, with
  the normalizer doubling as an independent value of lambda_n;
* the 0/1-sequence law by products of Bernoulli spacing probabilities over
  the full enumerated state space Delta_n, again self-normalized;
* the same law a second time from the chain's transition rows;
* parity and shape probabilities by an O(n^2) dynamic program over the
  position of the most recent 1, which also recomputes lambda_n;
* the conditioned-Poisson total's full distribution by direct convolution.

Exact rational arithmetic is used whenever theta is an int or Fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .chain import EtaSequence, transition_row
from .exact import CycleType, ModelParams, lambda_table

__all__ = [
    "VerifyReport",
    "enumerate_cycle_types",
    "type_probability",
    "enumerate_delta",
    "exact_eta_pmf",
    "eta_probability_chain",
    "shift",
    "verify_shift_ratio",
    "verify_ratio_proposition",
    "verify_chain_law",
    "verify_type_aggregation",
    "verify_parity_dp",
    "verify_alpha_beta",
    "verify_monotone",
    "verify_poisson_acceptance",
    "verify_tilt_roots",
    "parity_probabilities",
    "monotone_probabilities",
    "enumerate_eta_statistics",
    "poisson_sum_pmf",
    "run_verification_suite",
]


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of one oracle verification sweep."""

    name: str
    passed: bool
    checks: int
    max_error: float
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def _exact_theta(params: ModelParams):
    """Return theta as a Fraction when it is exactly representable."""
    t = params.theta
    if isinstance(t, (int, Fraction)):
        return Fraction(t)
    return None


# ---------------------------------------------------------------------------
# Cycle types


def _partitions_min2(n: int, max_part: int) -> Iterator[Tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for p in range(min(n, max_part), 1, -1):
        for rest in _partitions_min2(n - p, p):
            yield (p,) + rest


def enumerate_cycle_types(params: ModelParams) -> List[Tuple[CycleType, object]]:
    """All fixed-point-free cycle types of n with their probabilities.

    Unnormalized weights follow the sampling-formula expression
    n! * prod_j (theta/j)^{c_j} / c_j!; dividing by their total conditions on
    the absence of fixed points, so no lambda value is consulted.  Exact
    rationals when theta is rational.
    """
    n = params.n
    frac = _exact_theta(params)
    theta = frac if frac is not None else params.theta_float
    items = []
    total = theta * 0
    for parts in _partitions_min2(n, n):
        w = theta**0
        mult: Dict[int, int] = {}
        for p in parts:
            mult[p] = mult.get(p, 0) + 1
        for j, c in mult.items():
            if frac is not None:
                w *= Fraction(theta, j) ** c / math.factorial(c)
            else:
                w *= (theta / j) ** c / math.factorial(c)
        items.append((CycleType.from_counts(n, mult), w))
        total += w
    return [(ct, w / total) for ct, w in items]


def type_probability(params: ModelParams, cycle_type: CycleType):
    """Probability of one cycle type, by enumeration."""
    for ct, p in enumerate_cycle_types(params):
        if ct == cycle_type:
            return p
    raise ValueError(f"{cycle_type} is not a fixed-point-free type of n={params.n}")


# ---------------------------------------------------------------------------
# The 0/1-sequence state space


def _compositions_min2(n: int) -> Iterator[Tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(2, n + 1):
        if n - first == 1:
            continue
        for rest in _compositions_min2(n - first):
            yield (first,) + rest


def enumerate_delta(n: int) -> List[EtaSequence]:
    """All valid 0/1 sequences for a given n (one per ordered cycle split)."""
    if n < 2:
        raise ValueError("need n >= 2")
    return [EtaSequence.from_lengths(c) for c in _compositions_min2(n)]


def exact_eta_pmf(params: ModelParams) -> Dict[tuple, object]:
    """Exact law of the 0/1 sequence, keyed by its bits.

    Computed as the Bernoulli spacing product conditioned on validity: each
    position i >= 2 contributes theta/(theta+i-1) for a 1 and
    (i-1)/(theta+i-1) for a 0, and the normalizer is the sum over the
    enumerated state space.  Independent of both the lambda recurrence and
    the chain's transition rows.
    """
    n = params.n
    frac = _exact_theta(params)
    theta = frac if frac is not None else params.theta_float
    weights = {}
    total = theta * 0
    for eta in enumerate_delta(n):
        w = theta**0
        for k, bit in enumerate(eta.bits):
            i = n - k
            if i < 2:
                continue
            if frac is not None:
                w *= Fraction(theta, theta + i - 1) if bit else Fraction(i - 1, 1) / (theta + i - 1)
            else:
                w *= theta / (theta + i - 1) if bit else (i - 1) / (theta + i - 1)
        weights[eta.bits] = w
        total += w
    return {bits: w / total for bits, w in weights.items()}


def eta_probability_chain(params: ModelParams, eta: EtaSequence) -> float:
    """Probability of one 0/1 sequence as the chain's transition product.

    Multiplies the free transition rows at positions n-1 down to 3 (forced
    steps contribute factor 1).  Agreement with exact_eta_pmf over all of
    Delta_n is the core correctness check for the sampler's mechanics.
    """
    n = params.n
    table = lambda_table(params.theta_float, n)
    prob = 1.0
    prev = 0
    for i in range(n - 1, 2, -1):
        bit = eta.bits[n - i]
        if prev == 0:
            row = transition_row(table, i)
            prob *= row.p_emit1 if bit else row.p_stay0
        prev = bit
    return prob


# ---------------------------------------------------------------------------
# Local moves on the state space


def shift(eta: EtaSequence, i: int) -> EtaSequence:
    """Move the 1 at position i one slot down, to position i-1.

    Legal when 4 <= i <= n-1, eta_i = 1 and eta_{i-2} = 0; the result is
    again a valid sequence.
    """
    n = eta.n
    if not 4 <= i <= n - 1:
        raise ValueError(f"shift position must satisfy 4 <= i <= n-1, got {i}")
    bits = list(eta.bits)
    if bits[n - i] != 1:
        raise ValueError(f"no 1 at position {i}")
    if bits[n - (i - 2)] != 0:
        raise ValueError(f"position {i-2} already holds a 1")
    bits[n - i] = 0
    bits[n - (i - 1)] = 1
    return EtaSequence(n=n, bits=tuple(bits))


def verify_shift_ratio(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Check P(shifted)/P(original) == (i-1)/(i-2) for every legal shift.

    Sweeps every sequence of every size up to max_n.  The ratio is
    theta-free; verified exactly (rationals) for rational thetas, to near
    machine precision otherwise.
    """
    checks = 0
    max_err = 0.0
    for n in range(4, max_n + 1):
        for theta in thetas:
            params = ModelParams(n=n, theta=theta)
            pmf = exact_eta_pmf(params)
            for eta in enumerate_delta(n):
                for i in range(4, n):
                    bits = eta.bits
                    if bits[n - i] == 1 and bits[n - (i - 2)] == 0:
                        ratio = pmf[shift(eta, i).bits] / pmf[eta.bits]
                        expected = Fraction(i - 1, i - 2) if isinstance(ratio, Fraction) else (i - 1) / (i - 2)
                        err = abs(float(ratio - expected))
                        max_err = max(max_err, err)
                        checks += 1
    passed = max_err <= 1e-12
    return VerifyReport(
        name="shift-ratio",
        passed=passed,
        checks=checks,
        max_error=max_err,
        detail=f"n<={max_n}, thetas={list(thetas)}",
    )


def verify_ratio_proposition(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Check the ordering law within each cycle-type class, for n up to max_n.

    For two sequences r, r' with the same multiset of gaps, the probability
    ratio must equal prod_j (sigma_j(r') - 1) / (sigma_j(r) - 1) over the
    non-final 1 positions sigma_j.  Equivalent statement: given the type,
    the generation order is size-biased by cycle mass.
    """
    checks = 0
    max_err = 0.0
    for n in range(4, max_n + 1):
        for theta in thetas:
            params = ModelParams(n=n, theta=theta)
            pmf = exact_eta_pmf(params)
            by_type: Dict[tuple, List[EtaSequence]] = {}
            for eta in enumerate_delta(n):
                key = tuple(sorted(eta.to_lengths().lengths))
                by_type.setdefault(key, []).append(eta)
            for group in by_type.values():
                for a in group:
                    for b in group:
                        ones_a = a.ones_positions()[:-1]
                        ones_b = b.ones_positions()[:-1]
                        num = 1
                        den = 1
                        for sa, sb in zip(ones_a, ones_b):
                            num *= sb - 1
                            den *= sa - 1
                        ratio = pmf[a.bits] / pmf[b.bits]
                        if isinstance(ratio, Fraction):
                            err = abs(float(ratio - Fraction(num, den)))
                        else:
                            err = abs(ratio - num / den)
                        max_err = max(max_err, err)
                        checks += 1
    passed = max_err <= 1e-12
    return VerifyReport(
        name="ordering-ratio",
        passed=passed,
        checks=checks,
        max_error=max_err,
        detail=f"n<={max_n}, thetas={list(thetas)}",
    )


# ---------------------------------------------------------------------------
# Parity and shape probabilities


def _gap_dp(theta: float, n: int, allowed) -> Tuple[float, float]:
    """Probability that every gap satisfies `allowed`, plus lambda_n.

    Dynamic program over the position of the most recent 1, using raw
    Bernoulli spacing weights: position i >= 2 carries theta/(theta+i-1)
    for a 1 and (i-1)/(theta+i-1) for a 0.  h[p] is the unconditioned
    probability that the spacing process puts a 1 at p, zeros above it, and
    all completed gaps are allowed.  h[1] with no restriction equals
    lambda_n, giving the normalizer independently of any recurrence.
    """

    def one_factor(p: int) -> float:
        return 1.0 if p == 1 else theta / (theta + p - 1)

    def zero_factor(i: int) -> float:
        return (i - 1) / (theta + i - 1)

    h = np.zeros(n + 2)
    h[n + 1] = 1.0
    h_all = h.copy()
    for p in range(n - 1, 0, -1):
        acc = 0.0
        acc_all = 0.0
        prod = 1.0
        for q in range(p + 2, n + 2):
            prod *= zero_factor(q - 1) if q - 1 <= n else 1.0
            # prod is the weight of zeros strictly between p and q
            if allowed(q - p):
                acc += h[q] * prod
            acc_all += h_all[q] * prod
        h[p] = acc * one_factor(p)
        h_all[p] = acc_all * one_factor(p)
    return float(h[1]), float(h_all[1])


def parity_probabilities(params: ModelParams) -> Dict[str, float]:
    """P(all cycle lengths odd) and P(all even), with the DP's own lambda_n.

    O(n^2) dynamic program; practical for n in the hundreds.
    """
    n, theta = params.n, params.theta_float
    odd_raw, lam = _gap_dp(theta, n, lambda g: g % 2 == 1)
    even_raw, _ = _gap_dp(theta, n, lambda g: g % 2 == 0)
    return {
        "all_odd": odd_raw / lam,
        "all_even": even_raw / lam,
        "lambda_n": lam,
    }


def monotone_probabilities(params: ModelParams) -> Dict[str, float]:
    """P(generation order weakly decreasing / weakly increasing), exactly.

    Enumerates the state space, so intended for n <= 25 or so.
    """
    pmf = exact_eta_pmf(params)
    dec = 0.0
    inc = 0.0
    for bits, p in pmf.items():
        lengths = EtaSequence(n=params.n, bits=bits).to_lengths().lengths
        p = float(p)
        if all(a >= b for a, b in zip(lengths, lengths[1:])):
            dec += p
        if all(a <= b for a, b in zip(lengths, lengths[1:])):
            inc += p
    return {"weakly_decreasing": dec, "weakly_increasing": inc}


def enumerate_eta_statistics(params: ModelParams) -> Dict[str, float]:
    """Exact values of the summary statistics reported by the harness.

    Everything is an expectation over the enumerated 0/1-sequence law, so
    this is the ground truth simulations are tested against at small n.
    """
    pmf = exact_eta_pmf(params)
    out = {
        "single_cycle": 0.0,
        "distinct_lengths": 0.0,
        "all_odd": 0.0,
        "all_even": 0.0,
        "first_is_longest": 0.0,
        "mean_first_cycle": 0.0,
        "mean_longest_cycle": 0.0,
        "weakly_decreasing": 0.0,
        "weakly_increasing": 0.0,
        "num_cycles_mean": 0.0,
    }
    for bits, prob in pmf.items():
        p = float(prob)
        lengths = EtaSequence(n=params.n, bits=bits).to_lengths().lengths
        first = lengths[0]
        longest = max(lengths)
        out["single_cycle"] += p * (len(lengths) == 1)
        out["distinct_lengths"] += p * (len(set(lengths)) == len(lengths))
        out["all_odd"] += p * all(a % 2 == 1 for a in lengths)
        out["all_even"] += p * all(a % 2 == 0 for a in lengths)
        out["first_is_longest"] += p * (first == longest)
        out["mean_first_cycle"] += p * first
        out["mean_longest_cycle"] += p * longest
        out["weakly_decreasing"] += p * all(a >= b for a, b in zip(lengths, lengths[1:]))
        out["weakly_increasing"] += p * all(a <= b for a, b in zip(lengths, lengths[1:]))
        out["num_cycles_mean"] += p * len(lengths)
    return out


# ---------------------------------------------------------------------------
# Conditioned-Poisson total


def poisson_sum_pmf(theta: float, n: int, x: float) -> np.ndarray:
    """Distribution of sum_{j=2}^n j * Z_j with Z_j ~ Poisson(theta x^j / j).

    Plain lattice convolution, truncated at total n; entry t of the result
    is P(total == t) for t = 0..n.  Serves as the independent check of the
    closed-form acceptance probability at total == n.
    """
    dist = np.zeros(n + 1)
    dist[0] = 1.0
    for j in range(2, n + 1):
        mu = theta * x**j / j
        kmax = n // j
        pois = np.empty(kmax + 1)
        pois[0] = math.exp(-mu)
        for k in range(1, kmax + 1):
            pois[k] = pois[k - 1] * mu / k
        new = np.zeros(n + 1)
        for k in range(kmax + 1):
            new[j * k :] += pois[k] * dist[: n + 1 - j * k]
        dist = new
    return dist


# ---------------------------------------------------------------------------
# Verification suite


def verify_chain_law(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Chain transition products must reproduce the conditioned spacing law
    over the whole state space."""
    checks = 0
    max_err = 0.0
    for n in range(2, max_n + 1):
        for theta in thetas:
            params = ModelParams(n=n, theta=theta)
            pmf = exact_eta_pmf(params)
            for eta in enumerate_delta(n):
                err = abs(eta_probability_chain(params, eta) - float(pmf[eta.bits]))
                max_err = max(max_err, err)
                checks += 1
    return VerifyReport(
        name="chain-law",
        passed=max_err <= 1e-12,
        checks=checks,
        max_error=max_err,
        detail=f"n<={max_n}, thetas={list(thetas)}",
    )


def verify_type_aggregation(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Sequence probabilities grouped by multiset must equal the type law."""
    checks = 0
    max_err = 0.0
    for n in range(2, max_n + 1):
        for theta in thetas:
            params = ModelParams(n=n, theta=theta)
            pmf = exact_eta_pmf(params)
            agg: Dict[tuple, float] = {}
            for eta in enumerate_delta(n):
                key = tuple(sorted(eta.to_lengths().lengths))
                agg[key] = agg.get(key, 0.0) + float(pmf[eta.bits])
            for ct, p in enumerate_cycle_types(params):
                key = tuple(sorted(ct.lengths()))
                err = abs(agg[key] - float(p))
                max_err = max(max_err, err)
                checks += 1
    return VerifyReport(
        name="type-aggregation",
        passed=max_err <= 1e-12,
        checks=checks,
        max_error=max_err,
        detail=f"n<={max_n}, thetas={list(thetas)}",
    )


def verify_parity_dp(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """The O(n^2) parity DP must agree with enumeration, and its lambda_n
    by-product with the forward recurrence."""
    from .exact import lambda_table as _lt

    checks = 0
    max_err = 0.0
    for theta in thetas:
        for n in range(2, max_n + 1):
            params = ModelParams(n=n, theta=theta)
            dp = parity_probabilities(params)
            st = enumerate_eta_statistics(params)
            max_err = max(max_err, abs(dp["all_odd"] - st["all_odd"]))
            max_err = max(max_err, abs(dp["all_even"] - st["all_even"]))
            checks += 2
        for n_big in (100, 200):
            dp = parity_probabilities(ModelParams(n=n_big, theta=theta))
            lam = _lt(theta, n_big)[n_big]
            max_err = max(max_err, abs(dp["lambda_n"] - lam) / lam)
            checks += 1
    return VerifyReport(
        name="parity-dp",
        passed=max_err <= 1e-10,
        checks=checks,
        max_error=max_err,
        detail=f"enumeration n<={max_n}; lambda cross-check n in (100, 200)",
    )


def verify_alpha_beta(max_even_n: int, thetas: Sequence[float]) -> VerifyReport:
    """All-odd must be strictly less likely than all-even at every even n >= 4."""
    checks = 0
    worst = float("inf")
    for theta in thetas:
        for n in range(4, max_even_n + 1, 2):
            pr = parity_probabilities(ModelParams(n=n, theta=theta))
            margin = pr["all_even"] - pr["all_odd"]
            worst = min(worst, margin)
            checks += 1
    return VerifyReport(
        name="alpha-beta",
        passed=worst > 0.0,
        checks=checks,
        max_error=-worst if worst < 0 else 0.0,
        detail=f"min margin {worst:.3e} over even n<={max_even_n}",
    )


def verify_monotone(min_n: int, max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Weakly decreasing order must beat weakly increasing for n >= 5."""
    checks = 0
    worst = float("inf")
    for theta in thetas:
        for n in range(max(5, min_n), max_n + 1):
            mono = monotone_probabilities(ModelParams(n=n, theta=theta))
            margin = mono["weakly_decreasing"] - mono["weakly_increasing"]
            worst = min(worst, margin)
            checks += 1
    return VerifyReport(
        name="monotone-order",
        passed=worst > 0.0,
        checks=checks,
        max_error=-worst if worst < 0 else 0.0,
        detail=f"min margin {worst:.3e} over {max(5, min_n)}<=n<={max_n}",
    )


def verify_poisson_acceptance(max_n: int, thetas: Sequence[float]) -> VerifyReport:
    """Closed-form tilted acceptance must match direct convolution to 1e-10."""
    from .chain import conditioned_poisson_acceptance, solve_tilt

    checks = 0
    max_err = 0.0
    for theta in thetas:
        tilt = solve_tilt(theta)
        for n in range(2, max_n + 1):
            params = ModelParams(n=n, theta=theta)
            dp = poisson_sum_pmf(theta, n, tilt.x(n))[n]
            cf = conditioned_poisson_acceptance(params, tilt)
            max_err = max(max_err, abs(dp - cf))
            checks += 1
    return VerifyReport(
        name="poisson-acceptance",
        passed=max_err <= 1e-10,
        checks=checks,
        max_error=max_err,
        detail=f"n<={max_n}, thetas={list(thetas)}",
    )


def verify_tilt_roots(thetas: Sequence[float]) -> VerifyReport:
    """Tilt equation residuals must vanish to 1e-12 across the theta range."""
    from .chain import solve_tilt

    checks = 0
    max_err = 0.0
    for theta in thetas:
        s = solve_tilt(theta)
        max_err = max(max_err, abs(s.residual))
        checks += 1
    return VerifyReport(
        name="tilt-roots",
        passed=max_err <= 1e-12,
        checks=checks,
        max_error=max_err,
        detail=f"{len(list(thetas))} theta values",
    )


def run_verification_suite(max_n: int = 12, thetas: Optional[Sequence[float]] = None) -> List[VerifyReport]:
    """Run every oracle verification; all reports pass on a correct build."""
    if thetas is None:
        thetas = [0.5, 1.0, 5.0]
    thetas = list(thetas)
    small_n = min(max_n, 12)
    tilt_grid = sorted(set(thetas) | {0.01, 0.1, 2.0, 10.0, 100.0})
    return [
        verify_chain_law(small_n, thetas),
        verify_type_aggregation(min(max_n, 10), thetas),
        verify_shift_ratio(min(max_n, 14), thetas),
        verify_ratio_proposition(min(max_n, 10), thetas),
        verify_parity_dp(min(max_n, 14), thetas),
        verify_alpha_beta(24, thetas),
        verify_monotone(5, min(max_n + 8, 20), thetas),
        verify_poisson_acceptance(min(max_n + 28, 40), thetas),
        verify_tilt_roots(tilt_grid),
    ]
