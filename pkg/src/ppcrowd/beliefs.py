"""Belief random walks over contribution-phase epochs.

Each agent carries a belief in [0, 1] about the project being funded. From
the epoch the agent arrives, the belief evolves by additive steps drawn from
a step generator that may condition on public information (running total,
remaining epochs). Walks are clamped to [0, 1]; paths that touch a boundary
are flagged so martingale-style statistics can exclude them.

Built-in step families:

* bernoulli        - up-step with probability p, down-step otherwise.
* contribution_drift - mean step gain * (total/target - belief) plus noise.
* deadline_drift   - mean step -gain * (1 - remaining/horizon) plus noise.
* custom           - registry of named step rules (ships with "constant").

Drift classification (martingale / super / sub / mixed) is exact for the
built-ins and sample-based for custom rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .model import ScenarioError

# Two-sided normal quantile at confidence level 1e-3, used by the sampling
# classifier for custom step rules.
_Z_CLASSIFY = 3.2905267314919255


@dataclass(frozen=True)
class WalkEnv:
    """Public information available to a stepping belief walk."""

    current_total: float
    remaining_epochs: int
    provision_point: float

    def __post_init__(self) -> None:
        if self.current_total < 0:
            raise ScenarioError("current_total must be >= 0")
        if self.remaining_epochs < 0:
            raise ScenarioError("remaining_epochs must be >= 0")


class DriftClass(Enum):
    MARTINGALE = "martingale"
    SUPER_MARTINGALE = "super_martingale"
    SUB_MARTINGALE = "sub_martingale"
    MIXED = "mixed"


class StepGenerator:
    """Interface for belief step rules."""

    family = "abstract"

    def mean_step(self, env: WalkEnv, belief: float) -> float | None:
        """Analytical conditional mean step, or None if only sampling works."""
        raise NotImplementedError

    def draw(self, env: WalkEnv, belief: float, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def draw_many(
        self, env: WalkEnv, belief: float, rng: np.random.Generator, n: int
    ) -> np.ndarray:
        return np.array([self.draw(env, belief, rng) for _ in range(n)])

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SymmetricBernoulli(StepGenerator):
    """Two-point step: +step_up with probability p, step_down otherwise."""

    p: float
    step_up: float
    step_down: float
    family = "bernoulli"

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ScenarioError("bernoulli p must lie in [0, 1]")
        if not self.step_up > 0:
            raise ScenarioError("bernoulli step_up must be > 0")
        if not self.step_down < 0:
            raise ScenarioError("bernoulli step_down must be < 0")

    def mean_step(self, env: WalkEnv, belief: float) -> float:
        return self.p * self.step_up + (1.0 - self.p) * self.step_down

    def draw(self, env: WalkEnv, belief: float, rng: np.random.Generator) -> float:
        return self.step_up if rng.uniform() < self.p else self.step_down

    def draw_many(self, env, belief, rng, n):
        u = rng.uniform(size=n)
        return np.where(u < self.p, self.step_up, self.step_down)

    def to_config(self) -> dict:
        return {
            "family": "bernoulli",
            "p": self.p,
            "step_up": self.step_up,
            "step_down": self.step_down,
        }


@dataclass(frozen=True)
class ContributionDrift(StepGenerator):
    """Mean-reverting pull of the belief toward the funded fraction total/target."""

    gain: float
    noise_scale: float
    family = "contribution_drift"

    def __post_init__(self) -> None:
        if self.noise_scale < 0:
            raise ScenarioError("noise_scale must be >= 0")

    def mean_step(self, env: WalkEnv, belief: float) -> float:
        return self.gain * (env.current_total / env.provision_point - belief)

    def draw(self, env: WalkEnv, belief: float, rng: np.random.Generator) -> float:
        return self.mean_step(env, belief) + self.noise_scale * rng.standard_normal()

    def draw_many(self, env, belief, rng, n):
        return self.mean_step(env, belief) + self.noise_scale * rng.standard_normal(n)

    def to_config(self) -> dict:
        return {"family": "contribution_drift", "gain": self.gain, "noise_scale": self.noise_scale}


@dataclass(frozen=True)
class DeadlineDrift(StepGenerator):
    """Downward pull growing as the deadline approaches.

    horizon is the contribution-phase length; the env only carries remaining
    epochs, so the total must be stored here.
    """

    gain: float
    noise_scale: float
    horizon: int
    family = "deadline_drift"

    def __post_init__(self) -> None:
        if self.noise_scale < 0:
            raise ScenarioError("noise_scale must be >= 0")
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")

    def mean_step(self, env: WalkEnv, belief: float) -> float:
        return -self.gain * (1.0 - env.remaining_epochs / self.horizon)

    def draw(self, env: WalkEnv, belief: float, rng: np.random.Generator) -> float:
        return self.mean_step(env, belief) + self.noise_scale * rng.standard_normal()

    def draw_many(self, env, belief, rng, n):
        return self.mean_step(env, belief) + self.noise_scale * rng.standard_normal(n)

    def to_config(self) -> dict:
        return {
            "family": "deadline_drift",
            "gain": self.gain,
            "noise_scale": self.noise_scale,
            "horizon": self.horizon,
        }


# Custom step rules: (params, env, belief, rng) -> float. Classified by
# sampling, never analytically, so user-registered rules need no mean.
_CUSTOM_KINDS: dict[str, Callable[[dict, WalkEnv, float, np.random.Generator], float]] = {}


def register_custom_kind(
    name: str, fn: Callable[[dict, WalkEnv, float, np.random.Generator], float]
) -> None:
    _CUSTOM_KINDS[name] = fn


register_custom_kind("constant", lambda params, env, belief, rng: float(params["step"]))


@dataclass(frozen=True)
class CustomStep(StepGenerator):
    """Named step rule from the custom registry, with keyword parameters."""

    kind: str
    params: dict = field(default_factory=dict)
    family = "custom"

    def __post_init__(self) -> None:
        if self.kind not in _CUSTOM_KINDS:
            raise ScenarioError(
                f"unknown custom step kind {self.kind!r}; registered: {sorted(_CUSTOM_KINDS)}"
            )

    def mean_step(self, env: WalkEnv, belief: float) -> float | None:
        return None

    def draw(self, env: WalkEnv, belief: float, rng: np.random.Generator) -> float:
        # Consume one uniform even for degenerate rules so stream layouts
        # stay aligned with the two-point family.
        rng.uniform()
        return _CUSTOM_KINDS[self.kind](self.params, env, belief, rng)

    def draw_many(self, env, belief, rng, n):
        rng.uniform(size=n)
        fn = _CUSTOM_KINDS[self.kind]
        return np.array([fn(self.params, env, belief, rng) for _ in range(n)])

    def to_config(self) -> dict:
        return {"family": "custom", "kind": self.kind, **self.params}


def generator_from_config(cfg: dict) -> StepGenerator:
    """Build a step generator from its scenario-file mapping."""
    if "family" not in cfg:
        raise ScenarioError("generator config needs a 'family' key")
    family = str(cfg["family"]).lower()
    rest = {k: v for k, v in cfg.items() if k != "family"}
    try:
        if family == "bernoulli":
            return SymmetricBernoulli(
                p=float(rest["p"]),
                step_up=float(rest["step_up"]),
                step_down=float(rest["step_down"]),
            )
        if family == "contribution_drift":
            return ContributionDrift(
                gain=float(rest["gain"]), noise_scale=float(rest.get("noise_scale", 0.0))
            )
        if family == "deadline_drift":
            return DeadlineDrift(
                gain=float(rest["gain"]),
                noise_scale=float(rest.get("noise_scale", 0.0)),
                horizon=int(rest["horizon"]),
            )
        if family == "custom":
            kind = str(rest.pop("kind"))
            return CustomStep(kind=kind, params={k: rest[k] for k in sorted(rest)})
    except KeyError as exc:
        raise ScenarioError(f"generator family {family!r} missing parameter {exc}") from exc
    raise ScenarioError(f"unknown generator family {family!r}")


class BeliefWalk:
    """One agent's belief trajectory over contribution-phase epochs.

    The trajectory starts at the agent's arrival epoch with the prior belief
    (arriving agents have observed nothing yet) and appends one clamped value
    per subsequent step. Identical (master seed, stream id) pairs reproduce
    trajectories bit for bit.
    """

    def __init__(
        self,
        agent_id: int,
        b0: float,
        generator: StepGenerator,
        start_epoch: int = 1,
        rng_stream: tuple | int = 0,
        master_seed: int = 0,
    ):
        if not 0.0 <= b0 <= 1.0:
            raise ScenarioError("prior belief must lie in [0, 1]")
        self.agent_id = agent_id
        self.b0 = float(b0)
        self.generator = generator
        self.start_epoch = int(start_epoch)
        self.rng_stream = rng_stream
        self.master_seed = master_seed
        stream = rng_stream if isinstance(rng_stream, tuple) else (rng_stream,)
        self._rng = np.random.default_rng(np.random.SeedSequence((master_seed, *stream)))
        self.trajectory: list[float] = [self.b0]
        self.touched_boundary: bool = b0 in (0.0, 1.0)

    @property
    def belief(self) -> float:
        return self.trajectory[-1]

    @property
    def current_epoch(self) -> int:
        return self.start_epoch + len(self.trajectory) - 1

    def step(self, env: WalkEnv) -> float:
        """Advance one epoch; returns the new clamped belief."""
        x = self.generator.draw(env, self.belief, self._rng)
        b = self.belief + x
        if b < 0.0 or b > 1.0:
            self.touched_boundary = True
            b = min(1.0, max(0.0, b))
        self.trajectory.append(b)
        return b

    def sample_path(self, env_stream: Sequence[WalkEnv], horizon: int) -> np.ndarray:
        """Advance `horizon` steps using one env per step; returns the stepped values."""
        if horizon > len(env_stream):
            raise ScenarioError("env_stream shorter than requested horizon")
        out = np.empty(horizon)
        for i in range(horizon):
            out[i] = self.step(env_stream[i])
        return out


def sample_path_matrix(
    generator: StepGenerator,
    b0: float,
    n_paths: int,
    n_steps: int,
    seed: tuple | int,
    env_stream: Sequence[WalkEnv] | None = None,
    provision_point: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized path sampling for Monte Carlo work.

    Returns (paths, touched) where paths has shape (n_paths, n_steps + 1)
    with column 0 equal to b0, and touched flags paths that hit a boundary.
    One rng stream drives all paths, so a given seed pins the whole matrix.
    """
    stream = seed if isinstance(seed, tuple) else (seed,)
    rng = np.random.default_rng(np.random.SeedSequence(stream))
    if env_stream is None:
        env_stream = [
            WalkEnv(0.0, max(n_steps - 1 - i, 0), provision_point) for i in range(n_steps)
        ]
    paths = np.empty((n_paths, n_steps + 1))
    paths[:, 0] = b0
    touched = np.zeros(n_paths, dtype=bool)
    for t in range(n_steps):
        steps = generator.draw_many(env_stream[t], paths[:, t], rng, n_paths)
        raw = paths[:, t] + steps
        clipped = np.clip(raw, 0.0, 1.0)
        touched |= raw != clipped
        paths[:, t + 1] = clipped
    return paths, touched


def classify_generator(
    generator: StepGenerator,
    env_ensemble: Sequence[WalkEnv],
    beliefs: Sequence[float] | None = None,
    n_samples: int = 100_000,
    seed: int = 0,
) -> DriftClass:
    """Classify the conditional drift sign across an ensemble of environments.

    The built-in families expose analytical conditional means, so their
    classification is exact. Custom rules are sampled (>= n_samples draws per
    evaluation point) and signed through a two-sided confidence interval;
    inconsistent signs yield MIXED.

    The conditional mean may depend on the current belief as well as the env
    (the contribution_drift family does), so evaluation runs over a belief
    grid too; pass `beliefs` to override the default interior grid.
    """
    if not env_ensemble:
        raise ScenarioError("env_ensemble must be non-empty")
    if beliefs is None:
        beliefs = [0.1, 0.3, 0.5, 0.7, 0.9]
    means: list[float] = []
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC1A551F1)))
    for env in env_ensemble:
        for b in beliefs:
            mu = generator.mean_step(env, b)
            if mu is None:
                draws = generator.draw_many(env, b, rng, n_samples)
                m = float(np.mean(draws))
                se = float(np.std(draws, ddof=1)) / math.sqrt(n_samples) if n_samples > 1 else 0.0
                mu = 0.0 if abs(m) <= _Z_CLASSIFY * se else m
            means.append(float(mu))
    arr = np.asarray(means)
    pos, neg = bool(np.any(arr > 0)), bool(np.any(arr < 0))
    if not pos and not neg:
        return DriftClass.MARTINGALE
    if neg and not pos:
        return DriftClass.SUPER_MARTINGALE
    if pos and not neg:
        return DriftClass.SUB_MARTINGALE
    return DriftClass.MIXED


def default_env_ensemble(provision_point: float, contribution_deadline: int) -> list[WalkEnv]:
    """Representative env grid used when classifying an agent's generator."""
    totals = [0.0, provision_point / 2.0, provision_point]
    remaining = sorted({0, contribution_deadline // 2, contribution_deadline - 1})
    return [WalkEnv(c, r, provision_point) for c in totals for r in remaining]
