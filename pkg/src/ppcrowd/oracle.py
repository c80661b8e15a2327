"""Independent numerical verification of the analytical equilibrium claims.

Every closed-form claim gets an adversarial numerical check: the threshold
belief is recovered by grid search, the cap indifference identities are
evaluated directly, the low-class payoff monotonicity claim is adjudicated on
a belief grid, the timing rules are checked against Monte Carlo payoff
profiles over belief walks, and the equilibrium profile is stress-tested by
brute-force deviation sweeps on small instances. Reports carry the measured
and predicted values, the tolerance applied, and concrete counterexample
points on failure; every report is reproducible bit for bit from its seed.

Monte Carlo acceptance uses 3 sample standard errors with common random
numbers across the alternatives being compared.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .beliefs import (
    BeliefWalk,
    DriftClass,
    StepGenerator,
    SymmetricBernoulli,
    WalkEnv,
    sample_path_matrix,
)
from .engine import run_belief_phase, classify_scenario_drifts, run_full
from .equilibrium import (
    EquilibriumStrategy,
    TimingKind,
    assemble_strategies,
    belief_threshold,
    high_belief_cap,
    high_belief_timing,
    low_belief_cap,
    low_belief_timing,
    low_timing_precondition,
)
from .model import (
    BeliefClass,
    InstanceTooLargeError,
    LowCapVariant,
    ProjectConfig,
    ScenarioError,
    classify_belief,
    expected_funded_payoff,
    expected_unfunded_payoff,
)
from .scenario import PolicySpec, Scenario

MC_SIGMA = 3.0
REL_TOL = 1e-9
MONO_EPS = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Resolutions for grid-based verification."""

    belief_step: float = 1e-3
    contribution_points: int = 200
    mc_runs: int = 10_000

    def __post_init__(self) -> None:
        if self.belief_step <= 0 or self.contribution_points <= 0 or self.mc_runs <= 0:
            raise ScenarioError("grid resolutions must be positive")

    def belief_grid(self) -> np.ndarray:
        return np.arange(self.belief_step, 1.0, self.belief_step)


@dataclass
class OracleReport:
    """One verified claim: verdict, measured vs predicted, and evidence."""

    claim: str
    passed: bool
    measured: object
    predicted: object
    tolerance: object
    counterexamples: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    expected_documented: bool = False
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "passed": bool(self.passed),
            "measured": self.measured,
            "predicted": self.predicted,
            "tolerance": self.tolerance,
            "counterexamples": self.counterexamples,
            "details": self.details,
            "expected_documented": self.expected_documented,
            "seed": self.seed,
        }

    @property
    def hard_failure(self) -> bool:
        return (not self.passed) and (not self.expected_documented)


def _cap_high_vec(b: np.ndarray, theta: float, reward: float, cfg: ProjectConfig) -> np.ndarray:
    h, bc = cfg.provision_point, cfg.contribution_budget
    return h * b * (theta + reward) / (bc * (1.0 - b) + h * b)


def _cap_low_vec(
    b: np.ndarray, theta: float, reward: float, cfg: ProjectConfig, variant: LowCapVariant
) -> np.ndarray:
    h, bc = cfg.provision_point, cfg.contribution_budget
    denom = bc * (1.0 - b) + h * b
    if variant is LowCapVariant.PUBLISHED:
        return (h * b * theta + h * reward * (1.0 - b)) / denom
    return np.maximum(0.0, (h * b * theta - h * reward * (1.0 - b)) / denom)


def unfunded_value_profile(
    b: np.ndarray,
    belief_class: BeliefClass,
    theta: float,
    reward: float,
    cfg: ProjectConfig,
    variant: LowCapVariant | None = None,
) -> np.ndarray:
    """Expected refund-side payoff at the class cap, as a function of belief."""
    variant = variant or cfg.low_cap_variant
    ratio = cfg.contribution_budget / cfg.provision_point
    if belief_class is BeliefClass.HIGH:
        return (1.0 - b) * ratio * _cap_high_vec(b, theta, reward, cfg)
    return (1.0 - b) * (ratio * _cap_low_vec(b, theta, reward, cfg, variant) + reward)


def _flatness_test(
    values: np.ndarray, seed: int, calibration_draws: int = 4000
) -> tuple[bool, float, float]:
    """Simultaneous test that a Monte Carlo payoff profile is flat.

    Centers each path's profile, forms per-epoch deviations from the profile
    mean, and compares the largest standardized deviation against a critical
    value calibrated (from the estimated covariance of the mean profile) so
    the familywise error matches the two-sided 3-sigma convention. A plain
    per-pair 3-sigma rule over ten epochs rejects a truly flat profile far
    too often; this is the same tolerance applied simultaneously.

    Returns (flat, statistic, critical_value).
    """
    n, horizon = values.shape
    centered = values - values.mean(axis=1, keepdims=True)
    deviation = centered.mean(axis=0)
    se = centered.std(axis=0, ddof=1) / math.sqrt(n)
    se = np.where(se == 0, 1e-300, se)
    stat = float(np.max(np.abs(deviation) / se))
    cov = np.atleast_2d(np.cov(centered, rowvar=False)) / n
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF1A7)))
    draws = rng.multivariate_normal(np.zeros(horizon), cov, size=calibration_draws, method="eigh")
    null_stats = np.max(np.abs(draws) / se, axis=1)
    p_two_sided_3sigma = 0.0026997960632601866
    crit = float(np.quantile(null_stats, 1.0 - p_two_sided_3sigma))
    return stat <= crit, stat, crit


# ---------------------------------------------------------------------------
# Threshold belief


def verify_bstar(
    cfg: ProjectConfig,
    theta: float = 10.0,
    reward: float = 2.0,
    grid: GridSpec | None = None,
) -> OracleReport:
    """Grid-search the maximizer of the high-class refund payoff.

    Passes iff the grid argmax sits within one grid step of the closed form
    and the argmax is invariant across valuation/reward pairs (it must be:
    theta + reward is a positive constant factor of the objective).
    """
    grid = grid or GridSpec()
    b = grid.belief_grid()
    predicted = belief_threshold(cfg)
    pairs = [(theta, reward)] + [
        (theta * s, reward * t)
        for s, t in [(2, 1), (1, 3), (10, 10), (0.5, 1), (1, 0.25), (5, 1), (1, 1.5), (3, 2), (0.1, 0.1), (7, 0.5)]
    ]
    argmaxes = []
    for th, mw in pairs:
        f = unfunded_value_profile(b, BeliefClass.HIGH, th, mw, cfg)
        argmaxes.append(float(b[int(np.argmax(f))]))
    measured = argmaxes[0]
    err = abs(measured - predicted)
    invariant = max(argmaxes) - min(argmaxes) <= grid.belief_step / 2
    passed = err <= grid.belief_step and invariant
    counterexamples = []
    if not passed:
        counterexamples.append({"argmaxes": argmaxes, "predicted": predicted})
    return OracleReport(
        claim="threshold_belief_argmax",
        passed=passed,
        measured=measured,
        predicted=predicted,
        tolerance=grid.belief_step,
        counterexamples=counterexamples,
        details={
            "budget_ratio": cfg.contribution_budget / cfg.provision_point,
            "pairs_checked": len(pairs),
            "argmax_spread": max(argmaxes) - min(argmaxes),
        },
    )


# ---------------------------------------------------------------------------
# Cap indifference


def verify_indifference(
    cfg: ProjectConfig,
    belief_class: BeliefClass,
    belief: float,
    theta: float,
    reward: float,
    variant: LowCapVariant | None = None,
) -> OracleReport:
    """Check funded and refund expectations coincide at the class cap.

    The identity holds for the high class always and for the low class only
    under the rederived cap; the published low cap produces a known mismatch,
    reported as a documented expectation rather than a failure.
    """
    variant = variant or cfg.low_cap_variant
    if not 0.0 < belief < 1.0:
        raise ScenarioError("indifference check needs belief strictly inside (0, 1)")
    if belief_class is BeliefClass.HIGH:
        cap = high_belief_cap(belief, theta, reward, cfg)
    else:
        cap = low_belief_cap(belief, theta, reward, cfg, variant)
    lhs = expected_funded_payoff(belief_class, belief, theta, cap, reward)
    rhs = expected_unfunded_payoff(belief_class, belief, cap, cfg.provision_point, reward, cfg)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    rel = abs(lhs - rhs) / scale
    identity_expected = belief_class is BeliefClass.HIGH or variant is LowCapVariant.REDERIVED
    passed = rel <= REL_TOL
    return OracleReport(
        claim="cap_indifference",
        passed=passed,
        measured={"funded": lhs, "unfunded": rhs, "rel_gap": rel},
        predicted="funded == unfunded at the cap",
        tolerance=REL_TOL,
        counterexamples=[] if passed else [
            {"belief": belief, "theta": theta, "reward": reward, "cap": cap,
             "variant": variant.value}
        ],
        details={"class": belief_class.value, "variant": variant.value, "cap": cap},
        expected_documented=(not passed) and (not identity_expected),
    )


# ---------------------------------------------------------------------------
# Low-class payoff monotonicity (the sign adjudicator)


def verify_low_monotonicity(
    cfg: ProjectConfig,
    theta: float,
    reward: float,
    variant: LowCapVariant,
    grid: GridSpec | None = None,
    enforce_precondition: bool = True,
) -> OracleReport:
    """Adjudicate whether the low-class refund payoff increases with belief.

    Evaluates the profile over the belief grid under the chosen cap variant
    and reports strict monotonicity (successive differences above -1e-12) or
    the non-monotone regions otherwise. This is the empirical referee for the
    cap sign question: the claim is stated under reward < theta < reward *
    target / refund budget, and the verdict under each variant is evidence,
    not a suite gate.
    """
    grid = grid or GridSpec()
    precondition = low_timing_precondition(theta, reward, cfg)
    if enforce_precondition and not precondition:
        return OracleReport(
            claim="low_value_monotonicity",
            passed=True,
            measured="skipped",
            predicted="increasing in belief",
            tolerance=MONO_EPS,
            details={"status": "skipped", "precondition": False,
                     "theta": theta, "reward": reward, "variant": variant.value},
        )
    b = grid.belief_grid()
    f = unfunded_value_profile(b, BeliefClass.LOW, theta, reward, cfg, variant)
    diffs = np.diff(f)
    increasing = bool(np.all(diffs > -MONO_EPS))
    regions: list[dict] = []
    if not increasing:
        bad = diffs <= -MONO_EPS
        edges = np.flatnonzero(np.diff(bad.astype(int)))
        starts = [0] if bad[0] else []
        starts += [int(e) + 1 for e in edges if not bad[e] and bad[e + 1]]
        ends = [int(e) + 1 for e in edges if bad[e] and not bad[e + 1]]
        if bad[-1]:
            ends.append(len(bad))
        for s, e in zip(starts, ends):
            regions.append({"from_belief": float(b[s]), "to_belief": float(b[e])})
    direction = "increasing" if increasing else (
        "decreasing" if bool(np.all(diffs < MONO_EPS)) else "non_monotone"
    )
    return OracleReport(
        claim="low_value_monotonicity",
        passed=increasing,
        measured=direction,
        predicted="increasing in belief",
        tolerance=MONO_EPS,
        counterexamples=regions,
        details={
            "variant": variant.value,
            "theta": theta,
            "reward": reward,
            "precondition": precondition,
            "peak_belief": float(b[int(np.argmax(f))]),
            "value_at_peak": float(np.max(f)),
            "role": "adjudication",
        },
        # Adjudication evidence for the cap sign question, not a suite gate:
        # a non-increasing verdict is a recorded finding, not a hard failure.
        expected_documented=not increasing,
    )


def low_monotonicity_sweep(
    n_draws: int = 20,
    seed: int = 0,
    grid: GridSpec | None = None,
) -> list[OracleReport]:
    """Both cap variants across random parameter draws satisfying the stated condition."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x10A0)))
    reports: list[OracleReport] = []
    for _ in range(n_draws):
        reward = float(rng.uniform(0.5, 5.0))
        ratio = float(rng.uniform(2.0, 20.0))  # target over refund budget
        provision = float(rng.uniform(50.0, 500.0))
        cfg = ProjectConfig(
            provision_point=provision,
            contribution_budget=provision / ratio,
            belief_budget=1.0,
            belief_deadline=1,
            contribution_deadline=10,
        )
        theta = float(rng.uniform(reward * 1.05, reward * ratio * 0.95))
        for variant in (LowCapVariant.PUBLISHED, LowCapVariant.REDERIVED):
            reports.append(verify_low_monotonicity(cfg, theta, reward, variant, grid))
    return reports


# ---------------------------------------------------------------------------
# Timing rules


@dataclass(frozen=True)
class TimingCell:
    """One class-by-drift cell of the timing summary."""

    name: str
    belief_class: BeliefClass
    cfg: ProjectConfig
    generator: StepGenerator
    b0: float
    theta: float
    reward: float
    variant: LowCapVariant
    drift: DriftClass
    predicted_kind: TimingKind


def timing_cells(deadline: int = 10) -> list[TimingCell]:
    """The eight class-by-drift timing cells at desk-scale parameters.

    High-class priors must be at least one half, so the high cells use a
    refund budget of four times the target, placing the threshold belief at
    two thirds and leaving room for priors on both sides of it within the
    high class. Low cells satisfy the stated valuation/reward condition and
    use the rederived cap with priors inside its locally increasing belief
    region: under the published cap the refund profile is strictly decreasing
    there (see the monotonicity adjudicator), which empirically inverts the
    drift-case timing conclusions, so the published-variant cells are not
    reproducible as stated. Martingale cells use small steps so the
    second-order curvature of the payoff stays below Monte Carlo resolution.
    """
    high_cfg = ProjectConfig(
        provision_point=100.0, contribution_budget=400.0, belief_budget=10.0,
        belief_deadline=1, contribution_deadline=deadline,
    )
    low_cfg = ProjectConfig(
        provision_point=100.0, contribution_budget=10.0, belief_budget=10.0,
        belief_deadline=1, contribution_deadline=deadline,
        low_cap_variant=LowCapVariant.REDERIVED,
    )
    th, rw = 10.0, 2.0
    hi = BeliefClass.HIGH
    lo = BeliefClass.LOW
    bern = SymmetricBernoulli
    return [
        TimingCell("high_martingale", hi, high_cfg, bern(0.5, 0.001, -0.001), 0.55,
                   th, rw, LowCapVariant.PUBLISHED, DriftClass.MARTINGALE,
                   TimingKind.AT_DEADLINE),
        TimingCell("high_super_below_threshold", hi, high_cfg, bern(0.3, 0.02, -0.02), 0.55,
                   th, rw, LowCapVariant.PUBLISHED, DriftClass.SUPER_MARTINGALE,
                   TimingKind.IMMEDIATE),
        TimingCell("high_super_above_threshold", hi, high_cfg, bern(0.1, 0.0375, -0.0375), 0.8,
                   th, rw, LowCapVariant.PUBLISHED, DriftClass.SUPER_MARTINGALE,
                   TimingKind.FIRST_CROSSING),
        TimingCell("high_sub_above_threshold", hi, high_cfg, bern(0.7, 0.02, -0.02), 0.8,
                   th, rw, LowCapVariant.PUBLISHED, DriftClass.SUB_MARTINGALE,
                   TimingKind.IMMEDIATE),
        TimingCell("high_sub_below_threshold", hi, high_cfg, bern(0.9, 0.0375, -0.0375), 0.55,
                   th, rw, LowCapVariant.PUBLISHED, DriftClass.SUB_MARTINGALE,
                   TimingKind.FIRST_CROSSING),
        TimingCell("low_martingale", lo, low_cfg, bern(0.5, 0.003, -0.003), 0.5,
                   th, rw, LowCapVariant.REDERIVED, DriftClass.MARTINGALE,
                   TimingKind.AT_DEADLINE),
        TimingCell("low_super", lo, low_cfg, bern(0.2, 0.005, -0.005), 0.21,
                   th, rw, LowCapVariant.REDERIVED, DriftClass.SUPER_MARTINGALE,
                   TimingKind.IMMEDIATE),
        TimingCell("low_sub", lo, low_cfg, bern(0.8, 0.005, -0.005), 0.19,
                   th, rw, LowCapVariant.REDERIVED, DriftClass.SUB_MARTINGALE,
                   TimingKind.AT_DEADLINE),
    ]


def verify_timing(
    cell: TimingCell,
    mc_runs: int = 10_000,
    seed: int = 0,
) -> OracleReport:
    """Monte Carlo check of one timing cell.

    Simulates belief paths, evaluates the expected refund payoff of
    contributing at each fixed epoch (same paths across epochs: common random
    numbers), and compares the empirical argmax against the rule:

    * immediate rules pass when the first epoch is statistically tied with
      the best epoch at 3 paired standard errors;
    * deadline rules pass when the last epoch is tied with the best;
    * martingale cells must produce a statistically flat profile: the
      largest standardized deviation from the profile mean stays under a
      critical value calibrated to the familywise two-sided 3-sigma level
      (see _flatness_test);
    * crossing rules pass when some epoch tied with the best lies within one
      epoch of the median realized crossing epoch. The one-epoch allowance is
      the discretization gap of a crossing rule stated for continuous paths;
      the measured gap is reported.
    """
    if cell.drift is DriftClass.MIXED:
        raise ScenarioError("mixed drift cells are not verifiable")
    if mc_runs < 1:
        raise ScenarioError("mc_runs must be >= 1")
    if classify_belief(cell.b0) is not cell.belief_class:
        raise ScenarioError(
            f"cell {cell.name}: prior {cell.b0} classifies outside {cell.belief_class.value}"
        )
    deadline = cell.cfg.contribution_deadline
    paths, touched = sample_path_matrix(
        cell.generator, cell.b0, mc_runs, deadline - 1,
        seed=(seed, 0x71D1, zlib.crc32(cell.name.encode())),
        provision_point=cell.cfg.provision_point,
    )
    # paths[:, e-1] is the belief at epoch e (arrival at epoch 1 with b0).
    values = unfunded_value_profile(
        paths, cell.belief_class, cell.theta, cell.reward, cell.cfg, cell.variant
    )
    means = values.mean(axis=0)
    best = int(np.argmax(means))
    diffs = values[:, best][:, None] - values
    se = diffs.std(axis=0, ddof=1) / math.sqrt(mc_runs)
    gap = means[best] - means
    tied = gap <= MC_SIGMA * se + 1e-15
    ci_set = [int(t) + 1 for t in np.flatnonzero(tied)]

    if cell.belief_class is BeliefClass.HIGH:
        rule = high_belief_timing(cell.b0, cell.drift, cell.cfg, arrival=1)
    else:
        rule = low_belief_timing(cell.theta, cell.reward, cell.drift, cell.cfg, arrival=1)
    rule_consistent = rule.kind is cell.predicted_kind

    details: dict = {
        "cell": cell.name,
        "profile": [float(v) for v in means],
        "paired_se": [float(s) for s in se],
        "argmax_epoch": best + 1,
        "ci_tied_epochs": ci_set,
        "boundary_touch_fraction": float(np.mean(touched)),
        "rule": rule.describe(),
        "variant": cell.variant.value,
        "mc_runs": mc_runs,
    }
    if cell.drift is DriftClass.MARTINGALE:
        flat, stat, crit = _flatness_test(values, seed)
        passed = flat
        predicted = "flat profile; deadline rule"
        details.update({"flat": flat, "flatness_stat": stat, "flatness_crit": crit})
    elif cell.predicted_kind is TimingKind.IMMEDIATE:
        passed = 1 in ci_set
        predicted = "argmax at the arrival epoch"
    elif cell.predicted_kind is TimingKind.AT_DEADLINE:
        passed = deadline in ci_set
        predicted = "argmax at the deadline"
    else:
        direction = rule.direction or -1
        crossed = (
            (paths <= rule.threshold) if direction == -1 else (paths >= rule.threshold)
        )
        any_cross = crossed.any(axis=1)
        first = np.where(any_cross, crossed.argmax(axis=1) + 1, 0)
        frac = float(np.mean(any_cross))
        if frac == 0.0:
            passed = deadline in ci_set  # fallback epoch is the deadline
            median_cross = None
            crossing_gap = None
        else:
            median_cross = float(np.median(first[any_cross]))
            crossing_gap = min(abs(t - median_cross) for t in ci_set)
            passed = crossing_gap <= 1.0
        predicted = "argmax within one epoch of the median crossing epoch"
        details.update(
            {"crossed_fraction": frac, "median_crossing_epoch": median_cross,
             "crossing_gap_epochs": crossing_gap}
        )
    passed = passed and rule_consistent
    counterexamples = []
    if not passed:
        counterexamples.append(
            {"profile": details["profile"], "argmax_epoch": best + 1, "ci_set": ci_set}
        )
    return OracleReport(
        claim=f"timing::{cell.name}",
        passed=passed,
        measured={"argmax_epoch": best + 1, "ci_tied_epochs": ci_set},
        predicted=predicted,
        tolerance=f"{MC_SIGMA} paired standard errors",
        counterexamples=counterexamples,
        details=details,
        seed=seed,
    )


def verify_timing_suite(mc_runs: int = 10_000, seed: int = 0, deadline: int = 10) -> list[OracleReport]:
    return [verify_timing(cell, mc_runs=mc_runs, seed=seed) for cell in timing_cells(deadline)]


# ---------------------------------------------------------------------------
# Brute-force deviation sweep (desk scale)


def _belief_matrices(scenario: Scenario, n_runs: int) -> dict[int, np.ndarray]:
    """Per-agent belief-by-epoch matrices reproducing the engine's streams.

    Row r of matrix a is the belief of agent a at epochs 1..deadline in run
    r, drawn from the same (master_seed, run, agent) streams the engine uses,
    so the grid replay and engine runs share randomness exactly.
    """
    deadline = scenario.cfg.contribution_deadline
    out: dict[int, np.ndarray] = {}
    for agent in scenario.agents:
        gen = scenario.generators[agent.id]
        mat = np.empty((n_runs, deadline))
        for r in range(n_runs):
            walk = BeliefWalk(
                agent_id=agent.id, b0=agent.prior_belief, generator=gen,
                start_epoch=agent.arrival_cp, rng_stream=(r, agent.id),
                master_seed=scenario.master_seed,
            )
            beliefs = np.full(deadline, agent.prior_belief)
            for epoch in range(agent.arrival_cp + 1, deadline + 1):
                env = WalkEnv(0.0, deadline - epoch, scenario.cfg.provision_point)
                beliefs[epoch - 1] = walk.step(env)
            beliefs[: agent.arrival_cp - 1] = agent.prior_belief
            mat[r] = beliefs
        out[agent.id] = mat
    return out


def _replay_payoffs(
    scenario: Scenario,
    strategies: dict[int, EquilibriumStrategy],
    beliefs: dict[int, np.ndarray],
    deviator: int | None,
    deviation: tuple[float, int] | None,
) -> dict[int, np.ndarray]:
    """Vectorized across runs: replay the contribution phase and settle.

    Equilibrium agents fire by their timing rules on their belief rows; the
    deviator (if any) contributes a fixed amount at a fixed epoch instead.
    Note: the replayed walks ignore within-run feedback of the ledger onto
    env-dependent step families; the shipped deviation instances use
    env-independent walks, where the replay is exact (tested against the
    engine).
    """
    cfg = scenario.cfg
    deadline = cfg.contribution_deadline
    n_runs = next(iter(beliefs.values())).shape[0]
    ids = sorted(a.id for a in scenario.agents)
    agents = {a.id: a for a in scenario.agents}
    total = np.zeros(n_runs)
    done = {i: np.zeros(n_runs, dtype=bool) for i in ids}
    contrib = {i: np.zeros(n_runs) for i in ids}
    for epoch in range(1, deadline + 1):
        for agent_id in ids:
            a = agents[agent_id]
            if epoch < a.arrival_cp:
                continue
            b = beliefs[agent_id][:, epoch - 1]
            if agent_id == deviator:
                x_dev, t_dev = deviation
                fires = np.full(n_runs, epoch >= max(t_dev, a.arrival_cp))
                desired = np.full(n_runs, float(x_dev))
            else:
                st = strategies[agent_id]
                rule = st.timing
                if rule.kind is TimingKind.IMMEDIATE:
                    fires = np.full(n_runs, epoch >= rule.epoch)
                elif rule.kind is TimingKind.AT_DEADLINE:
                    fires = np.full(n_runs, epoch >= rule.epoch)
                else:
                    hit = (b <= rule.threshold) if rule.direction == -1 else (b >= rule.threshold)
                    fires = hit | (epoch >= (rule.fallback_epoch or deadline))
                if st.belief_class is BeliefClass.HIGH:
                    desired = _cap_high_vec(b, st.theta, st.reward, cfg)
                else:
                    desired = _cap_low_vec(b, st.theta, st.reward, cfg, st.variant)
            act = fires & ~done[agent_id] & (total < cfg.provision_point)
            if not act.any():
                continue
            deficit = cfg.provision_point - total
            amount = np.maximum(np.where(act, np.minimum(desired, deficit), 0.0), 0.0)
            contrib[agent_id] += amount
            total = np.where(
                act & (amount == deficit), cfg.provision_point, total + amount
            )
            done[agent_id] |= act
    funded = total >= cfg.provision_point
    payoffs: dict[int, np.ndarray] = {}
    for agent_id in ids:
        a = agents[agent_id]
        cls = classify_belief(a.prior_belief)
        x = contrib[agent_id]
        reward = a.bbr_reward
        funded_pay = a.valuation - x + (reward if cls is BeliefClass.HIGH else 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(x > 0, x / np.where(total > 0, total, 1.0), 0.0)
        unfunded_pay = share * cfg.contribution_budget + (
            reward if cls is BeliefClass.LOW else 0.0
        )
        payoffs[agent_id] = np.where(funded, funded_pay, unfunded_pay)
    return payoffs


def best_response_check(
    scenario: Scenario,
    agent_id: int,
    grid: GridSpec | None = None,
    mc_runs: int | None = None,
    seed: int = 0,
) -> OracleReport:
    """Sweep one agent's fixed (amount, epoch) deviations against the profile.

    All other agents play their equilibrium strategies; common random numbers
    are used across the whole grid. Passes iff no deviation cell exceeds the
    equilibrium payoff by more than 3 paired standard errors. Refused above
    desk scale (4 agents, 10 epochs).
    """
    grid = grid or GridSpec()
    runs = mc_runs or grid.mc_runs
    cfg = scenario.cfg
    if len(scenario.agents) > 4 or cfg.contribution_deadline > 10:
        raise InstanceTooLargeError(
            "deviation sweeps are desk scale: at most 4 agents and 10 epochs; "
            f"got {len(scenario.agents)} agents, {cfg.contribution_deadline} epochs"
        )
    bp = run_belief_phase(scenario)
    drifts = classify_scenario_drifts(scenario)
    strategies = {
        s.agent_id: s
        for s in assemble_strategies(scenario.agents, drifts, cfg, bp.rewards)
    }
    beliefs = _belief_matrices(scenario, runs)
    eq_payoffs = _replay_payoffs(scenario, strategies, beliefs, None, None)[agent_id]
    agent = next(a for a in scenario.agents if a.id == agent_id)
    x_grid = np.linspace(0.0, agent.valuation + agent.bbr_reward, grid.contribution_points)
    epochs = list(range(agent.arrival_cp, cfg.contribution_deadline + 1))
    worst = {"gain": -math.inf, "x": None, "epoch": None, "se": 0.0}
    exceed: list[dict] = []
    for t in epochs:
        for x in x_grid:
            dev = _replay_payoffs(scenario, strategies, beliefs, agent_id, (float(x), t))[agent_id]
            delta = dev - eq_payoffs
            gain = float(delta.mean())
            se = float(delta.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
            if gain > worst["gain"]:
                worst = {"gain": gain, "x": float(x), "epoch": t, "se": se}
            if gain > MC_SIGMA * se + 1e-12:
                exceed.append({"x": float(x), "epoch": t, "gain": gain, "se": se})
    passed = not exceed
    return OracleReport(
        claim=f"best_response::agent_{agent_id}",
        passed=passed,
        measured={"max_gain": worst["gain"], "at": {"x": worst["x"], "epoch": worst["epoch"]},
                  "se": worst["se"]},
        predicted="no deviation gains beyond tolerance",
        tolerance=f"{MC_SIGMA} paired standard errors",
        counterexamples=exceed[:10],
        details={
            "scenario": scenario.name,
            "mc_runs": runs,
            "grid_points": len(x_grid) * len(epochs),
            "equilibrium_mean_payoff": float(eq_payoffs.mean()),
        },
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Funded-at-equilibrium


def verify_funded_at_equilibrium(scenario: Scenario, run_index: int = 0) -> OracleReport:
    """Run the engine with everyone at equilibrium and check exact funding.

    When the desired (untruncated) amounts at the realized contribution
    epochs sum to at least the target, the run must end funded with total
    exactly equal to the target. A shortfall is reported as infeasibility of
    the equilibrium at these beliefs, not as a failure of the claim.
    """
    overrides = {a.id: PolicySpec(kind="equilibrium") for a in scenario.agents}
    outcome = run_full(scenario, run_index=run_index, policy_overrides=overrides)
    desired_sum = sum(outcome.desired.values())
    feasible = outcome.funded or desired_sum >= scenario.cfg.provision_point
    exact = outcome.final_total == scenario.cfg.provision_point
    if not feasible:
        status = "infeasible"
        passed = True
    elif outcome.funded and exact:
        status = "funded_exact"
        passed = True
    else:
        status = "violation"
        passed = False
    return OracleReport(
        claim="funded_at_equilibrium",
        passed=passed,
        measured={"funded": outcome.funded, "final_total": outcome.final_total,
                  "desired_sum": desired_sum},
        predicted="funded with total exactly at the target",
        tolerance=0.0,
        counterexamples=[] if passed else [
            {"scenario": scenario.name, "final_total": outcome.final_total}
        ],
        details={"status": status, "scenario": scenario.name,
                 "funded_epoch": outcome.funded_epoch},
    )


# ---------------------------------------------------------------------------
# Bundles

CLAIM_IDS = ("bstar", "indifference", "low_monotonicity", "timing", "best_response", "funded")


def run_claims(
    scenario: Scenario,
    claims: Sequence[str],
    seed: int = 0,
    grid: GridSpec | None = None,
) -> list[OracleReport]:
    """Run the selected verification claims against one scenario."""
    grid = grid or GridSpec()
    unknown = [c for c in claims if c not in CLAIM_IDS and c != "all"]
    if unknown:
        raise ScenarioError(f"unknown claim ids {unknown}; valid: {', '.join(CLAIM_IDS)}")
    wanted = set(CLAIM_IDS) if "all" in claims else set(claims)
    reports: list[OracleReport] = []
    cfg = scenario.cfg
    if "bstar" in wanted:
        reports.append(verify_bstar(cfg, grid=grid))
    if "indifference" in wanted:
        for b in (0.2, 0.4, 0.6, 0.8):
            reports.append(verify_indifference(cfg, BeliefClass.HIGH, b, 10.0, 2.0))
        for b in (0.2, 0.4):
            reports.append(
                verify_indifference(cfg, BeliefClass.LOW, b, 10.0, 2.0, LowCapVariant.REDERIVED)
            )
            reports.append(
                verify_indifference(cfg, BeliefClass.LOW, b, 10.0, 2.0, LowCapVariant.PUBLISHED)
            )
    if "low_monotonicity" in wanted:
        reports.extend(low_monotonicity_sweep(n_draws=20, seed=seed, grid=grid))
    if "timing" in wanted:
        reports.extend(verify_timing_suite(mc_runs=grid.mc_runs, seed=seed))
    if "best_response" in wanted:
        try:
            for agent in scenario.agents:
                reports.append(
                    best_response_check(scenario, agent.id, grid=grid, seed=seed)
                )
        except InstanceTooLargeError as exc:
            reports.append(
                OracleReport(
                    claim="best_response",
                    passed=True,
                    measured="skipped",
                    predicted="no deviation gains beyond tolerance",
                    tolerance=None,
                    details={"status": "skipped", "reason": str(exc)},
                )
            )
    if "funded" in wanted:
        reports.append(verify_funded_at_equilibrium(scenario))
    return reports
