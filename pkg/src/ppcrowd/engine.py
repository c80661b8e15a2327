"""Discrete-epoch execution of the two-phase crowdfunding game.

Belief phase: every agent reports its prior at its arrival epoch, reports are
scored, and the reward pot is split within each belief class. Contribution
phase: epochs advance one at a time; arrived agents' belief walks step on the
public state (running total at the start of the epoch, remaining epochs),
then agents whose policy fires contribute, in agent-id order, the minimum of
their desired amount and the remaining deficit. The phase stops as soon as
the target is reached, so the running total never overshoots and a funded run
ends with total exactly equal to the target.

Settlement: funded runs pay high-class agents valuation - contribution +
reward and low-class agents valuation - contribution. Unfunded runs return
every contribution, pay refund bonuses pro rata from the refund budget, and
pay low-class reporters their reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import BeliefWalk, WalkEnv, classify_generator, default_env_ensemble, DriftClass
from .equilibrium import EquilibriumStrategy, assemble_strategies
from .model import (
    Agent,
    BeliefClass,
    PolicyContractError,
    ProjectConfig,
    ScenarioError,
    classify_belief,
    realized_payoff,
    round_money,
)
from .rewards import BeliefReport, ScoreVector, compute_bbr, score_reports
from .scenario import PolicySpec, Scenario


@dataclass
class BeliefPhaseResult:
    reports: list[BeliefReport]
    scores: ScoreVector
    rewards: dict[int, float]
    classes: dict[int, BeliefClass]


@dataclass(frozen=True)
class LedgerEvent:
    epoch: int
    agent_id: int
    amount: float
    desired: float
    total_after: float


@dataclass
class Ledger:
    """Ordered contribution events plus the per-epoch running total."""

    deadline: int
    events: list[LedgerEvent] = field(default_factory=list)
    funded_epoch: int | None = None

    @property
    def total(self) -> float:
        return self.events[-1].total_after if self.events else 0.0

    @property
    def funded(self) -> bool:
        return self.funded_epoch is not None

    def totals_by_epoch(self) -> np.ndarray:
        """Running total at the end of each epoch 1..deadline (non-decreasing)."""
        out = np.zeros(self.deadline)
        t = 0.0
        by_epoch: dict[int, float] = {}
        for ev in self.events:
            by_epoch[ev.epoch] = ev.total_after
        for epoch in range(1, self.deadline + 1):
            t = by_epoch.get(epoch, t)
            out[epoch - 1] = t
        return out

    def mass_at_deadline(self) -> float:
        """Fraction of all contributed mass that arrived in the final epoch."""
        total = sum(ev.amount for ev in self.events)
        if total <= 0:
            return 0.0
        last = sum(ev.amount for ev in self.events if ev.epoch == self.deadline)
        return last / total


@dataclass
class SimOutcome:
    funded: bool
    funded_epoch: int | None
    final_total: float
    contributions: dict[int, float]
    desired: dict[int, float]
    contribution_epochs: dict[int, int | None]
    payoffs: dict[int, float]
    refund_bonuses: dict[int, float]
    returned: dict[int, float]
    bbr_paid: dict[int, float]
    announced_rewards: dict[int, float]
    classes: dict[int, BeliefClass]
    race_stats: float
    ledger: Ledger
    warnings: list[str] = field(default_factory=list)


def run_belief_phase(scenario: Scenario) -> BeliefPhaseResult:
    """Collect truthful reports at arrival epochs and split the reward pot."""
    reports = [
        BeliefReport(agent_id=a.id, belief=a.prior_belief, epoch=a.arrival_bp)
        for a in scenario.agents
    ]
    classes = {a.id: classify_belief(a.prior_belief) for a in scenario.agents}
    scores = score_reports(reports, scenario.scorer())
    rewards = compute_bbr(scores, classes, scenario.cfg.belief_budget) if reports else {}
    for agent in scenario.agents:
        agent.bbr_reward = rewards.get(agent.id, 0.0)
    return BeliefPhaseResult(reports=reports, scores=scores, rewards=rewards, classes=classes)


def classify_scenario_drifts(scenario: Scenario) -> dict[int, DriftClass]:
    envs = default_env_ensemble(
        scenario.cfg.provision_point, scenario.cfg.contribution_deadline
    )
    return {
        a.id: classify_generator(scenario.generators[a.id], envs, seed=scenario.master_seed)
        for a in scenario.agents
    }


class _Runtime:
    """Per-run mutable state for one agent during the contribution phase."""

    def __init__(self, agent: Agent, walk: BeliefWalk, policy: PolicySpec,
                 strategy: EquilibriumStrategy | None):
        self.agent = agent
        self.walk = walk
        self.policy = policy
        self.strategy = strategy
        self.contributed = False

    def desired_amount(self, epoch: int, deficit: float, cfg: ProjectConfig) -> float | None:
        """Amount the agent wants to contribute this epoch, or None to wait."""
        a = self.agent
        if epoch < a.arrival_cp or self.contributed:
            return None
        if self.policy.kind == "fixed":
            if self.policy.epoch < a.arrival_cp:
                raise PolicyContractError(
                    f"agent {a.id}: fixed policy epoch {self.policy.epoch} precedes arrival"
                )
            if self.policy.amount < 0:
                raise PolicyContractError(f"agent {a.id}: negative contribution")
            return self.policy.amount if epoch >= self.policy.epoch else None
        if self.policy.kind == "greedy":
            return self.policy.fraction * deficit if epoch >= a.arrival_cp else None
        st = self.strategy
        if st.timing.fires(epoch, self.walk.belief, a.arrival_cp, cfg.contribution_deadline):
            return st.cap_at(self.walk.belief, cfg)
        return None


def run_contribution_phase(
    scenario: Scenario,
    strategies: list[EquilibriumStrategy],
    run_index: int = 0,
    policy_overrides: dict[int, PolicySpec] | None = None,
) -> tuple[Ledger, dict[int, _Runtime]]:
    """Advance epochs 1..deadline, stepping walks and collecting contributions.

    Contributions are truncated to the remaining deficit (never overshoot);
    reaching the target ends the phase immediately. Within an epoch agents
    act in ascending id order, a documented tie-break.
    """
    cfg = scenario.cfg
    overrides = policy_overrides or {}
    by_id = {s.agent_id: s for s in strategies}
    runtimes: dict[int, _Runtime] = {}
    for agent in sorted(scenario.agents, key=lambda a: a.id):
        walk = BeliefWalk(
            agent_id=agent.id,
            b0=agent.prior_belief,
            generator=scenario.generators[agent.id],
            start_epoch=agent.arrival_cp,
            rng_stream=(run_index, agent.id),
            master_seed=scenario.master_seed,
        )
        runtimes[agent.id] = _Runtime(
            agent, walk, overrides.get(agent.id, scenario.policies[agent.id]), by_id[agent.id]
        )
    ledger = Ledger(deadline=cfg.contribution_deadline)
    total = 0.0
    for epoch in range(1, cfg.contribution_deadline + 1):
        env = WalkEnv(
            current_total=total,
            remaining_epochs=cfg.contribution_deadline - epoch,
            provision_point=cfg.provision_point,
        )
        # Walks step on the state observed at the start of the epoch; an
        # agent's belief at its arrival epoch is its prior.
        for rt in runtimes.values():
            if not rt.contributed and rt.agent.arrival_cp < epoch:
                rt.walk.step(env)
        for agent_id in sorted(runtimes):
            rt = runtimes[agent_id]
            desired = rt.desired_amount(epoch, cfg.provision_point - total, cfg)
            if desired is None:
                continue
            deficit = cfg.provision_point - total
            amount = min(desired, deficit)
            rt.contributed = True
            if amount <= 0:
                continue
            # Capped contributions land exactly on the target; assign rather
            # than accumulate so funded totals carry no float residue.
            total = cfg.provision_point if amount == deficit else total + amount
            ledger.events.append(
                LedgerEvent(
                    epoch=epoch,
                    agent_id=agent_id,
                    amount=amount,
                    desired=desired,
                    total_after=total,
                )
            )
            if total >= cfg.provision_point:
                ledger.funded_epoch = epoch
                break
        if ledger.funded:
            break
    return ledger, runtimes


def settle(
    ledger: Ledger,
    belief_phase: BeliefPhaseResult,
    scenario: Scenario,
    runtimes: dict[int, _Runtime] | None = None,
) -> SimOutcome:
    """Resolve payoffs, refunds, and reward payouts from a finished ledger."""
    cfg = scenario.cfg
    funded = ledger.funded
    total = ledger.total
    contributions = {a.id: 0.0 for a in scenario.agents}
    desired = {a.id: 0.0 for a in scenario.agents}
    epochs: dict[int, int | None] = {a.id: None for a in scenario.agents}
    for ev in ledger.events:
        contributions[ev.agent_id] += ev.amount
        desired[ev.agent_id] += ev.desired
        epochs[ev.agent_id] = ev.epoch
    payoffs: dict[int, float] = {}
    refund_bonuses: dict[int, float] = {}
    returned: dict[int, float] = {}
    bbr_paid: dict[int, float] = {}
    for agent in scenario.agents:
        cls = belief_phase.classes[agent.id]
        reward = belief_phase.rewards.get(agent.id, 0.0)
        x = contributions[agent.id]
        payoffs[agent.id] = realized_payoff(cls, agent.valuation, x, reward, total, funded, cfg)
        if funded:
            refund_bonuses[agent.id] = 0.0
            returned[agent.id] = 0.0
            bbr_paid[agent.id] = reward if cls is BeliefClass.HIGH else 0.0
        else:
            share = (x / total) * cfg.contribution_budget if x > 0 else 0.0
            refund_bonuses[agent.id] = share
            returned[agent.id] = x
            bbr_paid[agent.id] = reward if cls is BeliefClass.LOW else 0.0
    warnings = []
    if runtimes:
        for rt in runtimes.values():
            if rt.strategy and rt.strategy.timing_fallback:
                warnings.append(
                    f"agent {rt.agent.id}: low-class timing precondition failed; "
                    "fell back to the deadline"
                )
    return SimOutcome(
        funded=funded,
        funded_epoch=ledger.funded_epoch,
        final_total=total,
        contributions=contributions,
        desired=desired,
        contribution_epochs=epochs,
        payoffs=payoffs,
        refund_bonuses=refund_bonuses,
        returned=returned,
        bbr_paid=bbr_paid,
        announced_rewards=dict(belief_phase.rewards),
        classes=dict(belief_phase.classes),
        race_stats=ledger.mass_at_deadline(),
        ledger=ledger,
        warnings=warnings,
    )


def run_full(
    scenario: Scenario,
    run_index: int = 0,
    policy_overrides: dict[int, PolicySpec] | None = None,
    belief_phase: BeliefPhaseResult | None = None,
    drifts: dict[int, DriftClass] | None = None,
) -> SimOutcome:
    """One complete seeded run: belief phase, contribution phase, settlement."""
    bp = belief_phase or run_belief_phase(scenario)
    drifts = drifts or classify_scenario_drifts(scenario)
    strategies = assemble_strategies(scenario.agents, drifts, scenario.cfg, bp.rewards)
    ledger, runtimes = run_contribution_phase(
        scenario, strategies, run_index=run_index, policy_overrides=policy_overrides
    )
    return settle(ledger, bp, scenario, runtimes)


@dataclass
class EnsembleSummary:
    n_runs: int
    funded_rate: float
    funded_se: float
    mean_payoffs: dict[int, float]
    mean_contribution_epoch: float | None
    mean_race_stats: float
    mean_final_total: float
    outcomes: list[SimOutcome]


def run_ensemble(scenario: Scenario, n_runs: int) -> EnsembleSummary:
    """Independent seeded runs; run i uses streams (master_seed, i, agent)."""
    if n_runs < 1:
        raise ScenarioError("n_runs must be >= 1")
    bp = run_belief_phase(scenario)
    drifts = classify_scenario_drifts(scenario)
    outcomes = [
        run_full(scenario, run_index=i, belief_phase=bp, drifts=drifts) for i in range(n_runs)
    ]
    funded = np.array([o.funded for o in outcomes], dtype=float)
    rate = float(funded.mean())
    se = float(np.sqrt(rate * (1.0 - rate) / n_runs))
    mean_payoffs = {
        a.id: float(np.mean([o.payoffs[a.id] for o in outcomes])) for a in scenario.agents
    }
    epochs = [
        e for o in outcomes for e in o.contribution_epochs.values() if e is not None
    ]
    return EnsembleSummary(
        n_runs=n_runs,
        funded_rate=rate,
        funded_se=se,
        mean_payoffs=mean_payoffs,
        mean_contribution_epoch=float(np.mean(epochs)) if epochs else None,
        mean_race_stats=float(np.mean([o.race_stats for o in outcomes])),
        mean_final_total=float(np.mean([round_money(o.final_total) for o in outcomes])),
        outcomes=outcomes,
    )
