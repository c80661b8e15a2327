"""Closed-form equilibrium layer: contribution caps, timing rules, race verdicts.

Caps come from equating the belief-weighted funded payoff with the
belief-weighted refund payoff evaluated at total = provision point. Timing
depends on the drift class of the agent's belief walk and, for the high
class, on where the prior sits relative to the threshold belief that
maximizes the expected refund payoff.

The low-class cap ships in two variants (see LowCapVariant): the published
closed form adds the reward term, while re-solving the indifference
inequality yields a minus sign. Both are kept; the indifference identity is
only claimed for the rederived variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .beliefs import DriftClass
from .model import (
    Agent,
    BeliefClass,
    LowCapVariant,
    PreconditionUnsatisfiedError,
    ProjectConfig,
    ScenarioError,
    UnsupportedDriftError,
    classify_belief,
)


def high_belief_cap(belief: float, theta: float, reward: float, cfg: ProjectConfig) -> float:
    """Largest contribution a high-class agent accepts at the given belief.

    H*b*(theta+reward) / (B*(1-b) + H*b) with H the provision point and B the
    refund budget. Zero belief has no finite indifference point; the limit
    value 0 is returned.
    """
    if not 0.0 <= belief <= 1.0:
        raise ScenarioError("belief outside [0, 1]")
    if theta < 0 or reward < 0:
        raise ScenarioError("valuation and reward must be >= 0")
    if belief == 0.0:
        return 0.0
    h, bc = cfg.provision_point, cfg.contribution_budget
    return h * belief * (theta + reward) / (bc * (1.0 - belief) + h * belief)


def low_belief_cap(
    belief: float,
    theta: float,
    reward: float,
    cfg: ProjectConfig,
    variant: LowCapVariant | None = None,
) -> float:
    """Largest contribution a low-class agent accepts at the given belief.

    PUBLISHED: (H*b*theta + H*reward*(1-b)) / (B*(1-b) + H*b).
    REDERIVED: same with the reward term subtracted, floored at 0.
    The two coincide at reward = 0.
    """
    if not 0.0 <= belief <= 1.0:
        raise ScenarioError("belief outside [0, 1]")
    if theta < 0 or reward < 0:
        raise ScenarioError("valuation and reward must be >= 0")
    if belief == 0.0:
        variant = variant or cfg.low_cap_variant
        if variant is LowCapVariant.REDERIVED:
            return 0.0
        # Published form has a finite b -> 0 limit: H*reward/B.
        return cfg.provision_point * reward / cfg.contribution_budget if reward else 0.0
    h, bc = cfg.provision_point, cfg.contribution_budget
    denom = bc * (1.0 - belief) + h * belief
    variant = variant or cfg.low_cap_variant
    if variant is LowCapVariant.PUBLISHED:
        return (h * belief * theta + h * reward * (1.0 - belief)) / denom
    return max(0.0, (h * belief * theta - h * reward * (1.0 - belief)) / denom)


def belief_threshold(cfg: ProjectConfig) -> float:
    """Belief maximizing a high-class agent's expected refund payoff.

    sqrt(B/H) / (1 + sqrt(B/H)); always strictly inside (0, 1).
    """
    r = math.sqrt(cfg.contribution_budget / cfg.provision_point)
    return r / (1.0 + r)


class TimingKind(Enum):
    IMMEDIATE = "immediate"
    AT_DEADLINE = "at_deadline"
    FIRST_CROSSING = "first_crossing"


@dataclass(frozen=True)
class TimingRule:
    """When an equilibrium agent contributes.

    IMMEDIATE fires at the arrival epoch, AT_DEADLINE at the last epoch.
    FIRST_CROSSING fires the first epoch the walk crosses `threshold` in
    `direction` (-1 downward meaning belief <= threshold, +1 upward meaning
    belief >= threshold), falling back to the deadline if no crossing occurs.
    """

    kind: TimingKind
    epoch: int
    threshold: float | None = None
    direction: int | None = None
    fallback_epoch: int | None = None

    def fires(self, epoch: int, belief: float, arrival: int, deadline: int) -> bool:
        if epoch < arrival:
            return False
        if self.kind is TimingKind.IMMEDIATE:
            return epoch >= self.epoch
        if self.kind is TimingKind.AT_DEADLINE:
            return epoch >= self.epoch
        if self.direction == -1 and belief <= self.threshold:
            return True
        if self.direction == +1 and belief >= self.threshold:
            return True
        return epoch >= (self.fallback_epoch or deadline)

    def describe(self) -> str:
        if self.kind is TimingKind.FIRST_CROSSING:
            arrow = "down" if self.direction == -1 else "up"
            return f"first_crossing({self.threshold:.6g},{arrow},fallback={self.fallback_epoch})"
        return f"{self.kind.value}({self.epoch})"


class RaceVerdict(Enum):
    AVOIDED = "avoided"
    PERSISTS = "persists"


def high_belief_timing(
    b0: float, drift: DriftClass, cfg: ProjectConfig, arrival: int
) -> TimingRule:
    """Equilibrium contribution timing for a high-class agent.

    Martingale walks give no reason to move early, so the rule is the
    deadline. Downward-drifting walks contribute at arrival when the prior is
    at or below the threshold belief, otherwise at the first downward
    crossing; upward-drifting walks mirror this.
    """
    deadline = cfg.contribution_deadline
    bstar = belief_threshold(cfg)
    if drift is DriftClass.MIXED:
        raise UnsupportedDriftError("mixed drift has no timing characterization")
    if drift is DriftClass.MARTINGALE:
        return TimingRule(TimingKind.AT_DEADLINE, deadline)
    if drift is DriftClass.SUPER_MARTINGALE:
        if b0 <= bstar:
            return TimingRule(TimingKind.IMMEDIATE, arrival)
        return TimingRule(
            TimingKind.FIRST_CROSSING, arrival, threshold=bstar, direction=-1,
            fallback_epoch=deadline,
        )
    if b0 >= bstar:
        return TimingRule(TimingKind.IMMEDIATE, arrival)
    return TimingRule(
        TimingKind.FIRST_CROSSING, arrival, threshold=bstar, direction=+1,
        fallback_epoch=deadline,
    )


def low_timing_precondition(theta: float, reward: float, cfg: ProjectConfig) -> bool:
    """Condition under which the low-class timing characterization is stated.

    Requires theta > reward and theta < reward * target / refund budget,
    which is only satisfiable when the target exceeds the refund budget.
    """
    if reward <= 0:
        return False
    return theta > reward and theta < reward * cfg.provision_point / cfg.contribution_budget


def low_belief_timing(
    theta: float, reward: float, drift: DriftClass, cfg: ProjectConfig, arrival: int
) -> TimingRule:
    """Equilibrium contribution timing for a low-class agent.

    Raises PreconditionUnsatisfiedError when the stated valuation/reward
    condition fails; callers that need a total rule fall back to the deadline
    with a warning.
    """
    if drift is DriftClass.MIXED:
        raise UnsupportedDriftError("mixed drift has no timing characterization")
    if not low_timing_precondition(theta, reward, cfg):
        raise PreconditionUnsatisfiedError(
            "low-class timing requires reward < valuation < reward * target / refund_budget"
        )
    deadline = cfg.contribution_deadline
    if drift is DriftClass.SUPER_MARTINGALE:
        return TimingRule(TimingKind.IMMEDIATE, arrival)
    return TimingRule(TimingKind.AT_DEADLINE, deadline)


@dataclass
class EquilibriumStrategy:
    """Per-agent equilibrium play: truthful early report plus capped contribution.

    The contribution amount is the class cap evaluated at the belief held at
    the epoch the timing rule fires, truncated by the engine to the remaining
    deficit.
    """

    agent_id: int
    belief_class: BeliefClass
    report_belief: float
    report_epoch: int
    theta: float
    reward: float
    drift: DriftClass
    timing: TimingRule
    race: RaceVerdict
    variant: LowCapVariant
    timing_fallback: bool = False

    def cap_at(self, belief: float, cfg: ProjectConfig) -> float:
        if self.belief_class is BeliefClass.HIGH:
            return high_belief_cap(belief, self.theta, self.reward, cfg)
        return low_belief_cap(belief, self.theta, self.reward, cfg, self.variant)


def race_verdict(timing: TimingRule) -> RaceVerdict:
    """The race persists exactly when the rule defers to the deadline."""
    return RaceVerdict.PERSISTS if timing.kind is TimingKind.AT_DEADLINE else RaceVerdict.AVOIDED


def assemble_strategies(
    agents: Sequence[Agent],
    drifts: dict[int, DriftClass],
    cfg: ProjectConfig,
    rewards: dict[int, float] | None = None,
) -> list[EquilibriumStrategy]:
    """Build the full equilibrium profile for a population.

    Each agent reports its prior at its belief-phase arrival; the
    contribution cap and timing follow its class and drift. Rewards default
    to the agents' assigned bbr_reward fields. Scenarios without enough
    aggregate interest (total valuation <= target) are rejected.
    """
    if sum(a.valuation for a in agents) <= cfg.provision_point:
        raise ScenarioError("insufficient interest: total valuation must exceed the target")
    out: list[EquilibriumStrategy] = []
    for agent in agents:
        reward = (rewards or {}).get(agent.id, agent.bbr_reward)
        cls = classify_belief(agent.prior_belief)
        drift = drifts[agent.id]
        fallback = False
        if cls is BeliefClass.HIGH:
            timing = high_belief_timing(agent.prior_belief, drift, cfg, agent.arrival_cp)
        else:
            try:
                timing = low_belief_timing(agent.valuation, reward, drift, cfg, agent.arrival_cp)
            except PreconditionUnsatisfiedError:
                timing = TimingRule(TimingKind.AT_DEADLINE, cfg.contribution_deadline)
                fallback = True
        out.append(
            EquilibriumStrategy(
                agent_id=agent.id,
                belief_class=cls,
                report_belief=agent.prior_belief,
                report_epoch=agent.arrival_bp,
                theta=agent.valuation,
                reward=reward,
                drift=drift,
                timing=timing,
                race=race_verdict(timing),
                variant=cfg.low_cap_variant,
                timing_fallback=fallback,
            )
        )
    return out
