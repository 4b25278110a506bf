"""Enumeration oracle: the ground truth the samplers and formulas are held to."""

from fractions import Fraction

import pytest

from derange.chain import EtaSequence
from derange.exact import (
    ModelParams,
    mean_first_cycle_length,
    num_cycles_mean,
    single_cycle_prob,
)
from derange.oracle import (
    enumerate_cycle_types,
    enumerate_delta,
    enumerate_eta_statistics,
    exact_eta_pmf,
    eta_probability_chain,
    monotone_probabilities,
    parity_probabilities,
    run_verification_suite,
    shift,
    type_probability,
    verify_alpha_beta,
    verify_monotone,
    verify_parity_dp,
    verify_poisson_acceptance,
    verify_ratio_proposition,
    verify_shift_ratio,
)

FIBONACCI = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377]


class TestEnumeration:
    def test_state_space_sizes_are_fibonacci(self):
        for n, want in zip(range(2, 16), FIBONACCI):
            assert len(enumerate_delta(n)) == want

    def test_all_members_valid(self):
        for eta in enumerate_delta(9):
            assert eta.n == 9  # the constructor enforces the bit constraints

    def test_type_weights_n4(self):
        types = dict(
            (t.lengths(), w) for t, w in enumerate_cycle_types(ModelParams(n=4, theta=1))
        )
        assert types == {(4,): Fraction(2, 3), (2, 2): Fraction(1, 3)}

    def test_type_weights_n5(self):
        types = dict(
            (t.lengths(), w) for t, w in enumerate_cycle_types(ModelParams(n=5, theta=1))
        )
        assert types == {(5,): Fraction(6, 11), (2, 3): Fraction(5, 11)}

    def test_type_probability_lookup(self):
        p = ModelParams(n=5, theta=1)
        from derange.exact import CycleType

        assert type_probability(p, CycleType.from_lengths([5])) == Fraction(6, 11)
        assert type_probability(p, CycleType.from_lengths([2, 3])) == Fraction(5, 11)

    def test_eta_pmf_n5(self):
        pmf = exact_eta_pmf(ModelParams(n=5, theta=1))
        by_lengths = {
            EtaSequence(n=5, bits=b).to_lengths().lengths: p for b, p in pmf.items()
        }
        assert by_lengths == {
            (5,): Fraction(6, 11),
            (3, 2): Fraction(3, 11),
            (2, 3): Fraction(2, 11),
        }

    def test_eta_pmf_sums_to_one(self):
        for theta in (Fraction(1, 2), Fraction(5)):
            pmf = exact_eta_pmf(ModelParams(n=9, theta=theta))
            assert sum(pmf.values()) == 1

    def test_chain_route_agrees_with_xi_route(self):
        p = ModelParams(n=8, theta=0.7)
        pmf = exact_eta_pmf(p)
        for eta in enumerate_delta(8):
            assert eta_probability_chain(p, eta) == pytest.approx(
                float(pmf[eta.bits]), rel=1e-12
            )


class TestShift:
    def test_worked_example(self):
        eta = EtaSequence.from_lengths((3, 3, 3, 5))
        assert eta.ones_positions() == (12, 9, 6, 1)
        moved = shift(shift(eta, 12), 6)
        assert moved.ones_positions() == (11, 9, 5, 1)
        assert moved.to_lengths().lengths == (4, 2, 4, 4)

    def test_shift_validation(self):
        eta = EtaSequence.from_lengths((3, 3, 3, 5))
        with pytest.raises(ValueError):
            shift(eta, 13)  # out of range
        with pytest.raises(ValueError):
            shift(eta, 8)  # no 1 there
        eta2 = EtaSequence.from_lengths((2, 2, 10))
        with pytest.raises(ValueError):
            shift(eta2, 13)  # slot two below is occupied

    def test_ratio_sweep(self):
        report = verify_shift_ratio(12, [Fraction(1, 2), Fraction(1), Fraction(5)])
        assert report.passed
        assert report.max_error == 0.0  # exact rationals throughout
        assert report.checks > 500

    def test_ordering_ratio_sweep(self):
        report = verify_ratio_proposition(9, [Fraction(2, 3), Fraction(4)])
        assert report.passed
        assert report.max_error == 0.0


class TestStatistics:
    def test_match_closed_forms_n10(self):
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=10, theta=theta)
            stats = enumerate_eta_statistics(p)
            assert stats["single_cycle"] == pytest.approx(single_cycle_prob(p), rel=1e-10)
            assert stats["num_cycles_mean"] == pytest.approx(num_cycles_mean(p), rel=1e-10)
            assert stats["mean_first_cycle"] == pytest.approx(
                mean_first_cycle_length(p), rel=1e-10
            )

    def test_parity_dp_matches_enumeration(self):
        for theta in (0.5, 1.0, 5.0):
            p = ModelParams(n=11, theta=theta)
            stats = enumerate_eta_statistics(p)
            dp = parity_probabilities(p)
            assert dp["all_odd"] == pytest.approx(stats["all_odd"], abs=1e-12)
            assert dp["all_even"] == pytest.approx(stats["all_even"], abs=1e-12)

    def test_parity_edge_cases(self):
        # n = 4: all-even means types (4) and (2,2); all-odd is impossible
        dp = parity_probabilities(ModelParams(n=4, theta=1.0))
        assert dp["all_odd"] == pytest.approx(0.0, abs=1e-15)
        assert dp["all_even"] == pytest.approx(1.0, rel=1e-12)

    def test_monotone_matches_enumeration(self):
        p = ModelParams(n=10, theta=1.0)
        mono = monotone_probabilities(p)
        stats = enumerate_eta_statistics(p)
        assert mono["weakly_decreasing"] == pytest.approx(stats["weakly_decreasing"], abs=1e-12)
        assert mono["weakly_increasing"] == pytest.approx(stats["weakly_increasing"], abs=1e-12)

    def test_mean_lengths_ordering(self):
        # first-generated cycles are size-biased, so they run longer on
        # average than a uniformly ordered draw but not longer than the longest
        stats = enumerate_eta_statistics(ModelParams(n=12, theta=1.0))
        assert stats["mean_first_cycle"] <= stats["mean_longest_cycle"] + 1e-12
        assert stats["first_is_longest"] > 0.5


class TestVerifiers:
    def test_alpha_beta(self):
        report = verify_alpha_beta(20, [0.5, 1.0, 5.0])
        assert report.passed

    def test_monotone_order(self):
        report = verify_monotone(5, 16, [0.5, 1.0, 5.0])
        assert report.passed

    def test_parity_dp_report(self):
        report = verify_parity_dp(12, [0.5, 1.0, 5.0])
        assert report.passed
        assert report.max_error < 1e-10

    def test_poisson_acceptance_report(self):
        report = verify_poisson_acceptance(30, [0.5, 1.0, 5.0])
        assert report.passed
        assert report.max_error < 1e-10

    def test_full_suite_passes(self):
        reports = run_verification_suite(max_n=10)
        assert len(reports) == 9
        for report in reports:
            assert report.passed, f"{report.name}: {report.detail}"
        names = {r.name for r in reports}
        assert "chain-law" in names
        assert "tilt-roots" in names
