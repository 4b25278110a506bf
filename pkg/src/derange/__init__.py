"""Exact distribution theory and fast samplers for theta-biased derangements.

A derangement drawn with probability proportional to theta raised to its
number of cycles generalizes both the uniform derangement (theta = 1) and
the fixed-point-free slice of the general one-parameter permutation family.
This package provides:

* closed-form probabilities: the no-fixed-point weight lambda_n(theta),
  cycle-count moments and marginals, the number-of-cycles law, and
  first/longest-cycle functionals (:mod:`derange.exact`);
* three samplers with a shared reproducible stream protocol: an exact
  sequential Markov chain, plus two rejection schemes built on Bernoulli
  spacings and tilted Poisson counts (:mod:`derange.chain`), with compiled
  and pure-numpy batch kernels (:mod:`derange.backend`);
* brute-force small-n oracles used by the test suite to validate every
  formula and both sampler laws (:mod:`derange.oracle`);
* a simulation harness, summary statistics, and table reproduction with a
  command line front end (:mod:`derange.harness`, ``derange`` CLI).
"""

from .backend import available_backends, backend_name, kernels, set_backend
from .chain import (
    BatchResult,
    DerangementSample,
    EtaSequence,
    MaxAttemptsError,
    OrderedCycleLengths,
    RngStream,
    TiltSolution,
    TransitionRow,
    conditioned_poisson_acceptance,
    conditioned_poisson_acceptance_asymptotic,
    emit_probabilities,
    eta_to_lengths,
    permutation_from_type,
    realize_permutation,
    sample_conditioned_poisson,
    sample_eta,
    sample_feller_rejection,
    sample_lengths_batch,
    size_biased_order,
    solve_tilt,
    tilted_means,
    transition_row,
)
from .exact import (
    AltSumResult,
    CycleType,
    LambdaTable,
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
from .harness import (
    STATISTICS,
    TABLE_IDS,
    EstimateResult,
    TableResult,
    benchmark_backends,
    benchmark_methods,
    estimate,
    reproduce_table,
    statistic_values,
)
from .oracle import VerifyReport, run_verification_suite

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "LambdaTable",
    "lambda_table",
    "lambda_sequence",
    "lambda_altsum",
    "AltSumResult",
    "CycleType",
    "rising_factorial_log",
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
    "mean_first_cycle_length",
    "distinct_lengths_limit",
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
    "available_backends",
    "backend_name",
    "set_backend",
    "kernels",
    "STATISTICS",
    "TABLE_IDS",
    "EstimateResult",
    "TableResult",
    "estimate",
    "statistic_values",
    "reproduce_table",
    "benchmark_methods",
    "benchmark_backends",
    "VerifyReport",
    "run_verification_suite",
    "__version__",
]
