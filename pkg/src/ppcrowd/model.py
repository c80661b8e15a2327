"""Core domain types and the payoff algebra of the two-phase refund-bonus game.

A project issuer announces a funding target (the provision point) plus two
pots: a refund-bonus budget split pro rata among contributors if funding
fails, and a belief-reward budget split among belief reporters. Agents are
partitioned into High/Low belief classes by their reported belief; the two
classes have different payoff structures and different equilibrium caps.

All payoff functions here are pure and operate on exact floats. Rounding to
money precision happens only at ledger/serialization boundaries, never inside
formula evaluation, so the analytical identities hold to float accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

MONEY_DECIMALS = 9


class MechanismError(Exception):
    """Base class for all mechanism-level errors."""


class ScenarioError(MechanismError):
    """Invalid configuration or scenario input."""


class PayoffContractError(MechanismError):
    """Caller passed inconsistent state to a payoff function."""


class DegenerateScoresError(MechanismError):
    """All peer scores in a non-empty belief class are zero."""


class UnsupportedDriftError(MechanismError):
    """Drift class has no equilibrium timing characterization."""


class PreconditionUnsatisfiedError(MechanismError):
    """An operation's analytical precondition does not hold."""


class PolicyContractError(MechanismError):
    """A policy emitted an action violating its contract."""


class InstanceTooLargeError(MechanismError):
    """Brute-force verification refused; instance exceeds desk scale."""


def round_money(x: float) -> float:
    """Round to ledger precision. Use only when emitting ledger/output values."""
    return round(x, MONEY_DECIMALS)


class LowCapVariant(Enum):
    """Sign convention for the reward term in the low-class contribution cap.

    PUBLISHED adds the reward term in the numerator; REDERIVED subtracts it,
    which is the sign obtained by re-solving the funded-vs-unfunded
    indifference inequality for the low class. PUBLISHED is the default so
    default runs reproduce the as-published closed form; the indifference
    identity is only claimed (and tested) for REDERIVED.
    """

    PUBLISHED = "paper"
    REDERIVED = "rederived"

    @classmethod
    def parse(cls, token: str) -> "LowCapVariant":
        t = str(token).strip().lower()
        if t in ("paper", "published", "verbatim"):
            return cls.PUBLISHED
        if t in ("rederived", "corrected"):
            return cls.REDERIVED
        raise ScenarioError(f"unknown low-cap variant {token!r} (use 'paper' or 'rederived')")


class BeliefClass(Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class ProjectConfig:
    """Static parameters of one crowdfunding campaign.

    provision_point: funding target; the project is funded iff the running
        total ever reaches it before the contribution deadline.
    contribution_budget: refund-bonus pot paid pro rata to contributors on
        failure.
    belief_budget: reward pot split within each belief class by normalized
        peer scores.
    belief_deadline / contribution_deadline: epoch counts of the two phases.
    """

    provision_point: float
    contribution_budget: float
    belief_budget: float
    belief_deadline: int
    contribution_deadline: int
    low_cap_variant: LowCapVariant = LowCapVariant.PUBLISHED

    def __post_init__(self) -> None:
        if not self.provision_point > 0:
            raise ScenarioError("provision_point must be > 0")
        if not self.contribution_budget > 0:
            raise ScenarioError("contribution_budget must be > 0")
        if not self.belief_budget > 0:
            raise ScenarioError("belief_budget must be > 0")
        if int(self.belief_deadline) < 1 or int(self.contribution_deadline) < 1:
            raise ScenarioError("phase deadlines must be >= 1 epoch")

    @property
    def total_horizon(self) -> int:
        return int(self.belief_deadline) + int(self.contribution_deadline)


@dataclass
class Agent:
    """One participant: private valuation, prior belief, arrival epochs.

    bbr_reward is assigned after the belief phase (0 until then, and 0
    forever for an agent that never reports).
    """

    id: int
    valuation: float
    prior_belief: float
    arrival_bp: int = 1
    arrival_cp: int = 1
    bbr_reward: float = 0.0

    def __post_init__(self) -> None:
        if self.valuation < 0:
            raise ScenarioError(f"agent {self.id}: valuation must be >= 0")
        if not 0.0 <= self.prior_belief <= 1.0:
            raise ScenarioError(f"agent {self.id}: prior belief must lie in [0, 1]")
        if self.arrival_bp < 1 or self.arrival_cp < 1:
            raise ScenarioError(f"agent {self.id}: arrival epochs must be >= 1")


def classify_belief(reported_belief: float) -> BeliefClass:
    """Partition rule: HIGH iff the reported belief is at least one half."""
    if not 0.0 <= reported_belief <= 1.0:
        raise ScenarioError(f"belief {reported_belief!r} outside [0, 1]")
    return BeliefClass.HIGH if reported_belief >= 0.5 else BeliefClass.LOW


def realized_payoff(
    belief_class: BeliefClass,
    theta: float,
    x: float,
    reward: float,
    total_raised: float,
    funded: bool,
    cfg: ProjectConfig,
) -> float:
    """Realized net payoff of one agent given the run outcome.

    Funded: HIGH gets theta - x + reward, LOW gets theta - x. Unfunded: the
    contribution itself is returned (so it cancels out of the net payoff) and
    the agent receives the pro-rata refund bonus x / total_raised *
    contribution_budget; LOW reporters additionally receive their reward.
    The reward is paid on the outcome consistent with the class, and only to
    agents that reported (callers pass reward = 0 otherwise); it does not
    depend on the contribution size, including x = 0.
    """
    if x < 0:
        raise PayoffContractError("contribution must be >= 0")
    if funded != (total_raised >= cfg.provision_point):
        raise PayoffContractError(
            f"funded flag {funded} inconsistent with total {total_raised} "
            f"vs target {cfg.provision_point}"
        )
    if funded:
        base = theta - x
        return base + reward if belief_class is BeliefClass.HIGH else base
    # Unfunded branch.
    if x == 0:
        bonus = 0.0
    else:
        if total_raised <= 0:
            raise PayoffContractError("positive contribution with zero total raised")
        bonus = (x / total_raised) * cfg.contribution_budget
    return bonus if belief_class is BeliefClass.HIGH else bonus + reward


def expected_funded_payoff(
    belief_class: BeliefClass, belief: float, theta: float, x: float, reward: float
) -> float:
    """Belief-weighted funded payoff: b*(theta - x + reward) for HIGH, b*(theta - x) for LOW."""
    _check_belief(belief)
    if belief_class is BeliefClass.HIGH:
        return belief * (theta - x + reward)
    return belief * (theta - x)


def expected_unfunded_payoff(
    belief_class: BeliefClass,
    belief: float,
    x: float,
    total_raised: float,
    reward: float,
    cfg: ProjectConfig,
) -> float:
    """Belief-weighted unfunded payoff.

    HIGH: (1-b) * (x / total_raised) * contribution_budget.
    LOW:  (1-b) * ((x / total_raised) * contribution_budget + reward).
    At the equilibrium analysis point callers pass total_raised equal to the
    provision point.
    """
    _check_belief(belief)
    if x == 0:
        share = 0.0
    else:
        if total_raised <= 0:
            raise PayoffContractError("positive contribution with zero total raised")
        share = (x / total_raised) * cfg.contribution_budget
    if belief_class is BeliefClass.HIGH:
        return (1.0 - belief) * share
    return (1.0 - belief) * (share + reward)


def _check_belief(belief: float) -> None:
    if not 0.0 <= belief <= 1.0:
        raise ScenarioError(f"belief {belief!r} outside [0, 1]")
