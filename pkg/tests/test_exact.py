"""Exact formula layer: recurrences, moments, pmfs, and their identities."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derange.exact import (
    CycleType,
    ModelParams,
    cycle_count_pmf,
    derangement_cycle_count,
    distinct_lengths_limit,
    factorial_moment,
    first_cycle_survival,
    lambda_altsum,
    lambda_sequence,
    lambda_table,
    mean_cycle_count,
    mean_first_cycle_length,
    num_cycles_mean,
    num_cycles_pmf,
    rising_factorial_log,
    single_cycle_asymptotic,
    single_cycle_prob,
    stirling_first_unsigned,
)

# OEIS A000166
DERANGEMENTS = [1, 0, 1, 2, 9, 44, 265, 1854, 14833, 133496, 1334961,
                14684570, 176214841, 2290792932, 32071101049, 481066515734]


class TestLambda:
    def test_rational_start_values(self):
        lam = lambda_sequence(Fraction(1), 5)
        assert lam[0] == 1
        assert lam[1] == 0
        assert lam[2] == Fraction(1, 2)
        assert lam[4] == Fraction(3, 8)
        assert lam[5] == Fraction(11, 30)

    def test_theta_one_gives_derangement_counts(self):
        lam = lambda_sequence(Fraction(1), 15)
        for n in range(16):
            assert math.factorial(n) * lam[n] == DERANGEMENTS[n]

    def test_lambda2_is_one_over_one_plus_theta(self):
        for theta in (Fraction(1, 2), Fraction(5), Fraction(7, 3)):
            assert lambda_sequence(theta, 2)[2] == 1 / (1 + theta)

    def test_float_matches_rationals(self):
        for theta in (Fraction(1, 2), Fraction(5)):
            exact = lambda_sequence(theta, 40)
            approx = lambda_sequence(float(theta), 40)
            for n in range(41):
                assert approx[n] == pytest.approx(float(exact[n]), rel=1e-13)

    def test_lambda10_theta5_exact_fraction(self):
        assert lambda_sequence(Fraction(5), 10)[10] == Fraction(381653, 16144128)

    def test_frozen_values(self):
        assert lambda_table(0.5, 10)[10] == pytest.approx(0.5912368195959526, rel=1e-14)
        assert lambda_table(0.5, 50)[50] == pytest.approx(0.6034908529254467, rel=1e-14)
        assert lambda_table(5.0, 10)[10] == pytest.approx(0.023640360135895856, rel=1e-14)
        assert lambda_table(1.0, 250)[250] == pytest.approx(math.exp(-1), rel=1e-12)

    def test_table_prefix_consistency(self):
        table = lambda_table(0.7, 60)
        prefix = lambda_sequence(0.7, 25)
        for n in range(26):
            assert table[n] == prefix[n]

    def test_limit_is_exp_minus_theta(self):
        # the n -> infinity limit; the table converges to it visibly at theta=1
        assert lambda_table(1.0, 10).limit == pytest.approx(math.exp(-1.0))

    @given(theta=st.floats(0.05, 20), n=st.integers(2, 120))
    @settings(max_examples=60, deadline=None)
    def test_in_unit_interval_and_recurrence_stable(self, theta, n):
        lam = lambda_table(theta, n)
        assert 0.0 < lam[n] <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            lambda_sequence(0.0, 5)
        with pytest.raises(ValueError):
            lambda_sequence(-1.0, 5)
        with pytest.raises(ValueError):
            lambda_table(1.0, -1)


class TestAltSum:
    def test_matches_recurrence_when_reliable(self):
        for theta, n in [(0.5, 10), (0.5, 50), (1.0, 100), (5.0, 30), (5.0, 100), (2.0, 250)]:
            res = lambda_altsum(theta, n)
            assert res.reliable
            assert res.value == pytest.approx(lambda_table(theta, n)[n], rel=1e-8)

    def test_flags_catastrophic_cancellation(self):
        res = lambda_altsum(20.0, 80)
        assert not res.reliable
        assert res.max_term_ratio > 1e12


class TestModelParams:
    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ModelParams(n=1, theta=1.0)
        with pytest.raises(ValueError):
            ModelParams(n=10, theta=0.0)
        with pytest.raises(ValueError):
            ModelParams(n=10, theta=-2.0)

    def test_theta_float(self):
        assert ModelParams(n=4, theta=Fraction(1, 2)).theta_float == 0.5


class TestCycleType:
    def test_from_lengths_roundtrip(self):
        t = CycleType.from_lengths([3, 2, 2, 5])
        assert t.n == 12
        assert t.num_cycles == 4
        assert t.lengths() == (2, 2, 3, 5)
        assert t.count_of(2) == 2
        assert t.count_of(7) == 0

    def test_rejects_fixed_points(self):
        with pytest.raises(ValueError):
            CycleType.from_lengths([1, 3])

    def test_distinct_flag(self):
        assert CycleType.from_lengths([2, 3, 5]).all_lengths_distinct
        assert not CycleType.from_lengths([2, 2]).all_lengths_distinct

    @given(st.lists(st.integers(2, 9), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_lengths_sorted_and_sum(self, lengths):
        t = CycleType.from_lengths(lengths)
        assert sorted(lengths) == list(t.lengths())
        assert t.n == sum(lengths)


class TestStirlingAndCounts:
    def test_stirling_small_triangle(self):
        # |s(n, k)| rows for n = 0..4
        assert stirling_first_unsigned(0, 0) == 1
        assert stirling_first_unsigned(3, 1) == 2
        assert stirling_first_unsigned(3, 2) == 3
        assert stirling_first_unsigned(4, 2) == 11
        assert stirling_first_unsigned(5, 3) == 35
        assert stirling_first_unsigned(4, 0) == 0
        assert stirling_first_unsigned(3, 5) == 0

    def test_row_sums_are_factorials(self):
        for n in range(1, 9):
            assert sum(stirling_first_unsigned(n, k) for k in range(n + 1)) == math.factorial(n)

    def test_derangement_cycle_count_totals(self):
        # summing the refined counts over k recovers the derangement numbers
        for n in range(2, 12):
            assert sum(derangement_cycle_count(n, k) for k in range(1, n + 1)) == DERANGEMENTS[n]

    def test_derangement_cycle_count_n5(self):
        assert derangement_cycle_count(5, 1) == 24
        assert derangement_cycle_count(5, 2) == 20
        assert derangement_cycle_count(5, 3) == 0


class TestMomentsAndPmfs:
    def test_rising_factorial_at_theta_one(self):
        for n in (1, 5, 30):
            assert rising_factorial_log(1.0, n) == pytest.approx(math.lgamma(n + 1), rel=1e-14)

    def test_moment_orders_above_n_vanish(self):
        p = ModelParams(n=6, theta=1.0)
        assert factorial_moment(p, {7: 1}) == 0.0
        assert factorial_moment(p, {3: 3}) == 0.0  # 9 > 6

    def test_lengths_weighted_means_sum_to_n(self):
        # sum_j j E C_j = n, since the cycle lengths always sum to n
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=12, theta=theta)
            total = sum(j * mean_cycle_count(p, j) for j in range(2, 13))
            assert total == pytest.approx(12.0, rel=1e-10)

    def test_mean_counts_sum_to_num_cycles_mean(self):
        p = ModelParams(n=11, theta=0.7)
        total = sum(mean_cycle_count(p, j) for j in range(2, 12))
        assert total == pytest.approx(num_cycles_mean(p), rel=1e-10)

    def test_cycle_count_pmf_normalizes(self):
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=9, theta=theta)
            for j in (2, 3, 4):
                total = sum(cycle_count_pmf(p, j, r) for r in range(0, 9 // j + 1))
                assert total == pytest.approx(1.0, abs=1e-10)

    def test_cycle_count_pmf_mean_identity(self):
        p = ModelParams(n=10, theta=1.5)
        for j in (2, 3, 5):
            mean = sum(r * cycle_count_pmf(p, j, r) for r in range(0, 6))
            assert mean == pytest.approx(mean_cycle_count(p, j), rel=1e-9)

    def test_frozen_n5_values(self):
        p = ModelParams(n=5, theta=1.0)
        assert cycle_count_pmf(p, 2, 1) == pytest.approx(20 / 44, rel=1e-12)
        assert cycle_count_pmf(p, 2, 0) == pytest.approx(24 / 44, rel=1e-12)
        assert num_cycles_pmf(p, 1) == pytest.approx(24 / 44, rel=1e-12)
        assert num_cycles_pmf(p, 2) == pytest.approx(20 / 44, rel=1e-12)
        assert num_cycles_pmf(p, 3) == 0.0

    def test_num_cycles_pmf_normalizes(self):
        for theta in (0.5, 2.0):
            p = ModelParams(n=13, theta=theta)
            total = sum(num_cycles_pmf(p, k) for k in range(1, 14))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_num_cycles_mean_identity(self):
        p = ModelParams(n=13, theta=2.0)
        mean = sum(k * num_cycles_pmf(p, k) for k in range(1, 14))
        assert mean == pytest.approx(num_cycles_mean(p), rel=1e-10)

    def test_single_cycle_is_num_cycles_pmf_at_one(self):
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=16, theta=theta)
            assert single_cycle_prob(p) == pytest.approx(num_cycles_pmf(p, 1), rel=1e-10)

    def test_single_cycle_frozen_values(self):
        assert single_cycle_prob(ModelParams(10, 0.5)) == pytest.approx(0.47996535964294207, rel=1e-13)
        assert single_cycle_prob(ModelParams(10, 1.0)) == pytest.approx(0.2718281657666403, rel=1e-13)
        assert single_cycle_prob(ModelParams(10, 5.0)) == pytest.approx(0.02112914086879959, rel=1e-13)
        assert single_cycle_prob(ModelParams(50, 5.0)) == pytest.approx(3.290432438317064e-05, rel=1e-12)
        assert single_cycle_prob(ModelParams(250, 5.0)) == pytest.approx(1.621127293830908e-08, rel=1e-12)

    def test_asymptotic_single_cycle(self):
        # gamma(theta + 1) (e / n)^theta; exact at theta = 1 up to rounding
        assert single_cycle_asymptotic(ModelParams(10, 1.0)) == pytest.approx(math.e / 10, rel=1e-14)
        assert single_cycle_asymptotic(ModelParams(10, 0.5)) == pytest.approx(
            math.gamma(1.5) * math.sqrt(math.e / 10), rel=1e-13
        )
        # at theta = 1 the exact value converges to the asymptotic one fast
        assert single_cycle_prob(ModelParams(50, 1.0)) == pytest.approx(
            single_cycle_asymptotic(ModelParams(50, 1.0)), rel=1e-10
        )


class TestFirstCycle:
    def test_survival_boundaries(self):
        p = ModelParams(n=10, theta=1.0)
        assert first_cycle_survival(p, 0) == 1.0
        assert first_cycle_survival(p, 1) == 1.0  # cycles are never shorter than 2
        assert first_cycle_survival(p, 10) == 0.0

    def test_survival_monotone(self):
        for theta in (0.5, 5.0):
            p = ModelParams(n=14, theta=theta)
            values = [first_cycle_survival(p, l) for l in range(15)]
            for a, b in zip(values, values[1:]):
                assert a >= b - 1e-15

    def test_mean_is_survival_sum(self):
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=12, theta=theta)
            total = sum(first_cycle_survival(p, l) for l in range(12))
            assert mean_first_cycle_length(p) == pytest.approx(total, rel=1e-12)

    def test_frozen_mean(self):
        assert mean_first_cycle_length(ModelParams(10, 1.0)) == pytest.approx(
            6.449999662911502, rel=1e-12
        )

    def test_two_cycle_edge(self):
        # n = 2 has a single outcome, one 2-cycle
        p = ModelParams(n=2, theta=3.0)
        assert mean_first_cycle_length(p) == pytest.approx(2.0)
        assert single_cycle_prob(p) == pytest.approx(1.0)


class TestDistinctLimit:
    def test_frozen_values(self):
        assert distinct_lengths_limit(0.5) == pytest.approx(0.929330631622279, rel=1e-13)
        assert distinct_lengths_limit(1.0) == pytest.approx(0.7631025557979322, rel=1e-13)
        assert distinct_lengths_limit(5.0) == pytest.approx(0.011500905167215492, rel=1e-13)

    def test_decreasing_in_theta(self):
        values = [distinct_lengths_limit(t) for t in (0.1, 0.5, 1.0, 2.0, 5.0)]
        assert values == sorted(values, reverse=True)
