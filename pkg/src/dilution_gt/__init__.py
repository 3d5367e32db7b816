"""Non-adaptive Bernoulli group testing under dilution noise.

Simulation of the dilution channel, NCOMP and exhaustive ML decoding,
closed-form achievability/converse bounds, and a seeded Monte Carlo harness.
"""
from .bounds import BoundReport, bound_report, converse_tests, optimal_delta
from .decode import DecodeResult, GuardError, ml_oracle_decode, ncomp_decode
from .harness import ExperimentConfig, TrialStats, run_experiment, sweep
from .model import (
    DefectiveSet,
    DesignMatrix,
    OutcomeVector,
    ProblemParams,
    SeedSpec,
    dilute_outcomes,
    gen_design,
    noiseless_outcomes,
    resolve_alpha,
)

__all__ = [
    "BoundReport", "DecodeResult", "DefectiveSet", "DesignMatrix", "ExperimentConfig",
    "GuardError", "OutcomeVector", "ProblemParams", "SeedSpec", "TrialStats",
    "bound_report", "converse_tests", "dilute_outcomes", "gen_design", "ml_oracle_decode",
    "ncomp_decode", "noiseless_outcomes", "optimal_delta", "resolve_alpha", "run_experiment", "sweep",
]
