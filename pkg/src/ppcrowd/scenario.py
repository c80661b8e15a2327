"""Scenario files: schema, validating loader, canonical round-trip form.

A scenario is one YAML document:

    name: two_low_knife_edge          # optional label
    master_seed: 42
    config:
      provision_point: 100.0
      contribution_budget: 100.0
      belief_budget: 10.0
      belief_deadline: 3
      contribution_deadline: 10
      low_cap_variant: paper          # or: rederived
    defaults:                         # optional, applied to agents lacking keys
      generator: {family: bernoulli, p: 0.5, step_up: 0.01, step_down: -0.01}
      policy: {kind: equilibrium}
    agents:
      - id: 1
        valuation: 60.0
        prior_belief: 0.7
        arrival_bp: 1
        arrival_cp: 1
        generator: {family: bernoulli, p: 0.5, step_up: 0.01, step_down: -0.01}
        policy: {kind: equilibrium}   # or {kind: fixed, amount: X, epoch: T}
                                      # or {kind: greedy, fraction: F}
      ...
    scorer: {kind: uniform}           # or {kind: quadratic_proxy, reference: R}

Loading validates field ranges, arrival bounds against the phase deadlines,
unique agent ids, and the aggregate-interest assumption (total valuation must
exceed the target). `normalize_scenario` emits the canonical fully-expanded
YAML form: defaults resolved, keys sorted, floats as plain reprs. Emitting is
idempotent, which is what the round-trip tests pin down.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .beliefs import StepGenerator, generator_from_config
from .model import Agent, LowCapVariant, ProjectConfig, ScenarioError
from .rewards import PeerScorer, QuadraticProxyScorer, UniformScorer


@dataclass(frozen=True)
class PolicySpec:
    """Declarative contribution policy attached to an agent."""

    kind: str
    amount: float | None = None
    epoch: int | None = None
    fraction: float | None = None

    def to_config(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "amount": self.amount, "epoch": self.epoch}
        if self.kind == "greedy":
            return {"kind": "greedy", "fraction": self.fraction}
        return {"kind": "equilibrium"}

    @classmethod
    def from_config(cls, cfg: dict) -> "PolicySpec":
        kind = str(cfg.get("kind", "equilibrium")).lower()
        if kind == "equilibrium":
            return cls(kind="equilibrium")
        if kind == "fixed":
            try:
                return cls(kind="fixed", amount=float(cfg["amount"]), epoch=int(cfg["epoch"]))
            except KeyError as exc:
                raise ScenarioError(f"fixed policy missing {exc}") from exc
        if kind == "greedy":
            try:
                return cls(kind="greedy", fraction=float(cfg["fraction"]))
            except KeyError as exc:
                raise ScenarioError(f"greedy policy missing {exc}") from exc
        raise ScenarioError(f"unknown policy kind {kind!r}")


@dataclass
class Scenario:
    """Validated scenario: campaign config, agents, walks, policies, seed."""

    cfg: ProjectConfig
    agents: list[Agent]
    generators: dict[int, StepGenerator]
    policies: dict[int, PolicySpec]
    master_seed: int
    name: str = "scenario"
    scorer_config: dict = field(default_factory=lambda: {"kind": "uniform"})

    @property
    def total_valuation(self) -> float:
        return sum(a.valuation for a in self.agents)

    def scorer(self) -> PeerScorer:
        kind = str(self.scorer_config.get("kind", "uniform")).lower()
        if kind == "uniform":
            return UniformScorer()
        if kind == "quadratic_proxy":
            return QuadraticProxyScorer(float(self.scorer_config["reference"]))
        raise ScenarioError(f"unknown scorer kind {kind!r}")


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return mapping[key]


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from a parsed mapping."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    cfg_map = dict(_require(doc, "config", "scenario"))
    cfg = ProjectConfig(
        provision_point=float(_require(cfg_map, "provision_point", "config")),
        contribution_budget=float(_require(cfg_map, "contribution_budget", "config")),
        belief_budget=float(_require(cfg_map, "belief_budget", "config")),
        belief_deadline=int(_require(cfg_map, "belief_deadline", "config")),
        contribution_deadline=int(_require(cfg_map, "contribution_deadline", "config")),
        low_cap_variant=LowCapVariant.parse(cfg_map.get("low_cap_variant", "paper")),
    )
    defaults = doc.get("defaults", {}) or {}
    agent_maps = doc.get("agents", [])
    if not agent_maps:
        raise ScenarioError("scenario has no agents")
    agents: list[Agent] = []
    generators: dict[int, StepGenerator] = {}
    policies: dict[int, PolicySpec] = {}
    for idx, raw in enumerate(agent_maps):
        where = f"agents[{idx}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{where}: must be a mapping")
        merged = {**defaults, **raw}
        agent = Agent(
            id=int(_require(merged, "id", where)),
            valuation=float(_require(merged, "valuation", where)),
            prior_belief=float(_require(merged, "prior_belief", where)),
            arrival_bp=int(merged.get("arrival_bp", 1)),
            arrival_cp=int(merged.get("arrival_cp", 1)),
        )
        if agent.arrival_bp > cfg.belief_deadline:
            raise ScenarioError(f"{where}: arrival_bp beyond belief deadline")
        if agent.arrival_cp > cfg.contribution_deadline:
            raise ScenarioError(f"{where}: arrival_cp beyond contribution deadline")
        if agent.id in generators:
            raise ScenarioError(f"{where}: duplicate agent id {agent.id}")
        generators[agent.id] = generator_from_config(dict(_require(merged, "generator", where)))
        policies[agent.id] = PolicySpec.from_config(dict(merged.get("policy", {})))
        agents.append(agent)
    scenario = Scenario(
        cfg=cfg,
        agents=agents,
        generators=generators,
        policies=policies,
        master_seed=int(doc.get("master_seed", 0)),
        name=str(doc.get("name", "scenario")),
        scorer_config=dict(doc.get("scorer", {"kind": "uniform"})),
    )
    if scenario.total_valuation <= cfg.provision_point:
        raise ScenarioError(
            "insufficient interest: total valuation "
            f"{scenario.total_valuation} must exceed target {cfg.provision_point}"
        )
    scenario.scorer()  # validate scorer config eagerly
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical fully-expanded mapping (defaults resolved, plain floats)."""
    return {
        "name": scenario.name,
        "master_seed": scenario.master_seed,
        "config": {
            "provision_point": float(scenario.cfg.provision_point),
            "contribution_budget": float(scenario.cfg.contribution_budget),
            "belief_budget": float(scenario.cfg.belief_budget),
            "belief_deadline": int(scenario.cfg.belief_deadline),
            "contribution_deadline": int(scenario.cfg.contribution_deadline),
            "low_cap_variant": scenario.cfg.low_cap_variant.value,
        },
        "scorer": copy.deepcopy(scenario.scorer_config),
        "agents": [
            {
                "id": a.id,
                "valuation": float(a.valuation),
                "prior_belief": float(a.prior_belief),
                "arrival_bp": int(a.arrival_bp),
                "arrival_cp": int(a.arrival_cp),
                "generator": scenario.generators[a.id].to_config(),
                "policy": scenario.policies[a.id].to_config(),
            }
            for a in sorted(scenario.agents, key=lambda a: a.id)
        ],
    }


def normalize_scenario(scenario: Scenario) -> str:
    """Byte-stable canonical YAML text for manifests and round-trip checks."""
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=True, default_flow_style=False)


def dump_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(normalize_scenario(scenario), encoding="utf-8")
