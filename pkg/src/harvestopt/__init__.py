"""Finite-horizon throughput maximization for a wirelessly powered device.

A device charges from a power beacon over a fading channel, then transmits
its data before a deadline. This package provides the closed-form optimal
controller (time-varying battery thresholds that end the charging phase and
per-slot battery spend fractions), brute-force dynamic-programming reference
solvers that validate those closed forms, and a reproducible Monte Carlo
experiment engine with baseline policies.
"""

from .channel import (
    Deterministic,
    DiscreteChannel,
    Exponential,
    FadingLaw,
    discretize,
    sample,
)
from .oracle import (
    GridSpec,
    ItValueTable,
    StoppingTable,
    closed_form_gap,
    dp_it_value,
    dp_stopping,
    extract_threshold,
)
from .policy import (
    PolicyTables,
    SystemParams,
    alpha_star,
    build_tables,
    compute_q_table,
    expected_stop_value,
    should_stop,
    solve_gamma,
    value,
)
from .sim import (
    BetaPolicy,
    EpisodeTrace,
    ForcedStopPolicy,
    MonteCarloSummary,
    OptimalPolicy,
    PolicySpec,
    run_episode,
    run_monte_carlo,
)

__version__ = "0.1.0"

__all__ = [
    "Deterministic",
    "DiscreteChannel",
    "Exponential",
    "FadingLaw",
    "discretize",
    "sample",
    "GridSpec",
    "ItValueTable",
    "StoppingTable",
    "closed_form_gap",
    "dp_it_value",
    "dp_stopping",
    "extract_threshold",
    "PolicyTables",
    "SystemParams",
    "alpha_star",
    "build_tables",
    "compute_q_table",
    "expected_stop_value",
    "should_stop",
    "solve_gamma",
    "value",
    "BetaPolicy",
    "EpisodeTrace",
    "ForcedStopPolicy",
    "MonteCarloSummary",
    "OptimalPolicy",
    "PolicySpec",
    "run_episode",
    "run_monte_carlo",
    "__version__",
]
