"""Belief-based rewards: peer scores, time-normalized weights, budget split.

Each reporter gets a raw peer score y_i from a pluggable scorer. Its weight
is y_i normalized over everyone who had reported by the same epoch, so equal
scores earn weakly more for earlier reporters. The reward pot is then split
within each belief class in proportion to the weights; each non-empty class's
rewards sum to the full pot.

The scorer interface deliberately stays small: the mechanism only needs a
non-negative score per report. The default scorer is uniform; a quadratic
proxy that scores reports against a reference funding outcome is included
for experiments. Incentive properties of any particular scorer are not
asserted anywhere in this package, only the budget and ordering identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .model import BeliefClass, DegenerateScoresError, ScenarioError


@dataclass(frozen=True)
class BeliefReport:
    agent_id: int
    belief: float
    epoch: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.belief <= 1.0:
            raise ScenarioError(f"report of agent {self.agent_id}: belief outside [0, 1]")
        if self.epoch < 1:
            raise ScenarioError(f"report of agent {self.agent_id}: epoch must be >= 1")


class PeerScorer(Protocol):
    def score(self, reports: Sequence[BeliefReport]) -> Sequence[float]: ...


class UniformScorer:
    """Every report scores 1; weights then reduce to 1/|reported so far|."""

    name = "uniform"

    def score(self, reports: Sequence[BeliefReport]) -> list[float]:
        return [1.0] * len(reports)


class QuadraticProxyScorer:
    """Quadratic proximity of the report to a reference outcome in [0, 1]."""

    name = "quadratic_proxy"

    def __init__(self, reference: float):
        if not 0.0 <= reference <= 1.0:
            raise ScenarioError("reference outcome must lie in [0, 1]")
        self.reference = float(reference)

    def score(self, reports: Sequence[BeliefReport]) -> list[float]:
        return [1.0 - (r.belief - self.reference) ** 2 for r in reports]


@dataclass
class ScoreVector:
    """Raw scores and time-normalized weights, aligned with agent_ids."""

    agent_ids: list[int]
    raw: np.ndarray
    weights: np.ndarray

    def weight_of(self, agent_id: int) -> float:
        return float(self.weights[self.agent_ids.index(agent_id)])


def score_reports(reports: Sequence[BeliefReport], scorer: PeerScorer) -> ScoreVector:
    """Score reports and normalize each over the set reported up to its epoch.

    Reports are processed in (epoch, agent_id) order; simultaneous reports
    share the same normalization set, so id order never affects weights.
    """
    if not reports:
        return ScoreVector(agent_ids=[], raw=np.array([]), weights=np.array([]))
    ordered = sorted(reports, key=lambda r: (r.epoch, r.agent_id))
    ids = [r.agent_id for r in ordered]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate agent ids among belief reports")
    raw = np.asarray(scorer.score(ordered), dtype=float)
    if raw.shape != (len(ordered),):
        raise DegenerateScoresError("scorer must return one score per report")
    if np.any(raw < 0):
        raise DegenerateScoresError("scorer returned a negative score")
    epochs = np.array([r.epoch for r in ordered])
    weights = np.empty(len(ordered))
    for i, r in enumerate(ordered):
        denom = float(raw[epochs <= r.epoch].sum())
        weights[i] = raw[i] / denom if denom > 0 else 0.0
    return ScoreVector(agent_ids=ids, raw=raw, weights=weights)


def compute_bbr(
    scores: ScoreVector,
    classes: dict[int, BeliefClass],
    belief_budget: float,
) -> dict[int, float]:
    """Split the reward pot within each belief class, pro rata by weight.

    Each non-empty class's rewards sum to the full pot; an empty class simply
    receives nothing. A non-empty class whose weights all vanish has no
    defined split and raises DegenerateScoresError.
    """
    rewards: dict[int, float] = {}
    for cls in (BeliefClass.HIGH, BeliefClass.LOW):
        members = [i for i, a in enumerate(scores.agent_ids) if classes[a] is cls]
        if not members:
            continue
        total = float(scores.weights[members].sum())
        if total <= 0:
            raise DegenerateScoresError(f"all weights zero in non-empty class {cls.value}")
        for i in members:
            rewards[scores.agent_ids[i]] = float(scores.weights[i]) / total * belief_budget
    return rewards
