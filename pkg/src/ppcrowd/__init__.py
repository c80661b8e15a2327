"""Provision-point crowdfunding with refund bonuses and evolving beliefs.

A numpy-backed library for simulating a two-phase crowdfunding mechanism
(belief reporting, then contributions toward a funding target), deriving its
closed-form equilibrium strategies, and numerically verifying every
equilibrium claim at desk scale.
"""

__version__ = "0.1.0"

from .beliefs import (
    BeliefWalk,
    ContributionDrift,
    CustomStep,
    DeadlineDrift,
    DriftClass,
    StepGenerator,
    SymmetricBernoulli,
    WalkEnv,
    classify_generator,
    generator_from_config,
    sample_path_matrix,
)
from .engine import (
    EnsembleSummary,
    Ledger,
    SimOutcome,
    run_belief_phase,
    run_contribution_phase,
    run_ensemble,
    run_full,
    settle,
)
from .equilibrium import (
    EquilibriumStrategy,
    RaceVerdict,
    TimingKind,
    TimingRule,
    assemble_strategies,
    belief_threshold,
    high_belief_cap,
    high_belief_timing,
    low_belief_cap,
    low_belief_timing,
    low_timing_precondition,
)
from .model import (
    Agent,
    BeliefClass,
    LowCapVariant,
    MechanismError,
    ProjectConfig,
    ScenarioError,
    classify_belief,
    expected_funded_payoff,
    expected_unfunded_payoff,
    realized_payoff,
)
from .oracle import (
    GridSpec,
    OracleReport,
    best_response_check,
    low_monotonicity_sweep,
    run_claims,
    timing_cells,
    verify_bstar,
    verify_funded_at_equilibrium,
    verify_indifference,
    verify_low_monotonicity,
    verify_timing,
    verify_timing_suite,
)
from .rewards import (
    BeliefReport,
    QuadraticProxyScorer,
    ScoreVector,
    UniformScorer,
    compute_bbr,
    score_reports,
)
from .scenario import (
    PolicySpec,
    Scenario,
    dump_scenario,
    load_scenario,
    normalize_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
