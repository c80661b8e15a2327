"""Batch entry point: equilibrium tables, simulation, verification, sweeps.

Subcommands:

    ppcrowd equilibrium --scenario S --out DIR [--seed N] [--variant paper|rederived]
    ppcrowd simulate    --scenario S --out DIR [--runs N] [--seed N]
    ppcrowd verify      --scenario S --out DIR [--claims all|id,id,...] [--seed N]
    ppcrowd sweep       --scenario S --out DIR --param P --range V1,V2,... [--runs N] [--seed N]

Every invocation writes a manifest.json recording the subcommand, the seed,
the normalized scenario checksum, and a checksum per output file. Outputs
contain no timestamps or absolute paths, so re-running a manifest's command
reproduces every byte. CSV files always start with their header row; the
schema version is recorded in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .engine import run_belief_phase, classify_scenario_drifts, run_ensemble
from .equilibrium import assemble_strategies, belief_threshold
from .model import LowCapVariant, MechanismError, ScenarioError, round_money
from .oracle import CLAIM_IDS, GridSpec, run_claims
from .scenario import Scenario, load_scenario, normalize_scenario, scenario_from_dict, scenario_to_dict

SCHEMA_VERSION = 1

SWEEP_PARAMS = ("B_C", "B_B", "H0", "b0", "drift_gain")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(round_money(value))
    return str(value)


def _sanitize(obj):
    """Round floats to money precision for stable serialized output."""
    if isinstance(obj, float):
        return round_money(obj)
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _sanitize(dataclasses.asdict(obj))
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(
    out_dir: Path, subcommand: str, scenario: Scenario, seed: int, args: dict
) -> Path:
    outputs = {
        p.name: _sha256(p)
        for p in sorted(out_dir.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "subcommand": subcommand,
        "seed": seed,
        "scenario_name": scenario.name,
        "scenario_sha256": hashlib.sha256(
            normalize_scenario(scenario).encode("utf-8")
        ).hexdigest(),
        "args": args,
        "outputs": outputs,
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path


def _prepare(args) -> tuple[Scenario, Path, int]:
    scenario = load_scenario(args.scenario)
    if getattr(args, "variant", None):
        doc = scenario_to_dict(scenario)
        doc["config"]["low_cap_variant"] = LowCapVariant.parse(args.variant).value
        scenario = scenario_from_dict(doc)
    seed = args.seed if args.seed is not None else scenario.master_seed
    if seed != scenario.master_seed:
        doc = scenario_to_dict(scenario)
        doc["master_seed"] = int(seed)
        scenario = scenario_from_dict(doc)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return scenario, out_dir, int(seed)


def cmd_equilibrium(args) -> int:
    scenario, out_dir, seed = _prepare(args)
    bp = run_belief_phase(scenario)
    drifts = classify_scenario_drifts(scenario)
    strategies = assemble_strategies(scenario.agents, drifts, scenario.cfg, bp.rewards)
    bstar = belief_threshold(scenario.cfg)
    rows = []
    records = []
    for st in sorted(strategies, key=lambda s: s.agent_id):
        cap0 = st.cap_at(st.report_belief, scenario.cfg)
        rows.append([
            st.agent_id, st.belief_class.value, st.report_belief, st.drift.value,
            st.reward, cap0, st.timing.describe(), st.race.value, st.timing_fallback,
        ])
        records.append({
            "agent_id": st.agent_id,
            "belief_class": st.belief_class.value,
            "prior_belief": st.report_belief,
            "drift": st.drift.value,
            "reward": st.reward,
            "cap_at_prior": cap0,
            "timing": st.timing.describe(),
            "race": st.race.value,
            "timing_fallback": st.timing_fallback,
        })
    write_csv(
        out_dir / "strategies.csv",
        ["agent_id", "belief_class", "prior_belief", "drift", "reward",
         "cap_at_prior", "timing", "race", "timing_fallback"],
        rows,
    )
    write_json(out_dir / "strategies.json", {
        "threshold_belief": bstar,
        "low_cap_variant": scenario.cfg.low_cap_variant.value,
        "strategies": records,
    })
    write_manifest(out_dir, "equilibrium", scenario, seed,
                   {"variant": scenario.cfg.low_cap_variant.value})
    print(f"equilibrium: {len(records)} strategies -> {out_dir}")
    return 0


def cmd_simulate(args) -> int:
    scenario, out_dir, seed = _prepare(args)
    summary = run_ensemble(scenario, args.runs)
    outcome_rows = []
    for i, outcome in enumerate(summary.outcomes):
        write_csv(
            out_dir / f"ledger_run{i:04d}.csv",
            ["epoch", "agent_id", "amount", "desired", "total_after"],
            [[ev.epoch, ev.agent_id, ev.amount, ev.desired, ev.total_after]
             for ev in outcome.ledger.events],
        )
        for a in scenario.agents:
            outcome_rows.append([
                i, a.id, outcome.classes[a.id].value,
                outcome.contributions[a.id], outcome.contribution_epochs[a.id],
                outcome.payoffs[a.id], outcome.refund_bonuses[a.id],
                outcome.bbr_paid[a.id], outcome.funded,
            ])
    write_csv(
        out_dir / "outcomes.csv",
        ["run", "agent_id", "belief_class", "contribution", "contribution_epoch",
         "payoff", "refund_bonus", "bbr_paid", "funded"],
        outcome_rows,
    )
    write_json(out_dir / "summary.json", {
        "n_runs": summary.n_runs,
        "funded_rate": summary.funded_rate,
        "funded_se": summary.funded_se,
        "mean_payoffs": {str(k): v for k, v in summary.mean_payoffs.items()},
        "mean_contribution_epoch": summary.mean_contribution_epoch,
        "mean_race_stats": summary.mean_race_stats,
        "mean_final_total": summary.mean_final_total,
        "seed": seed,
    })
    write_manifest(out_dir, "simulate", scenario, seed, {"runs": args.runs})
    print(f"simulate: {summary.n_runs} runs, funded rate {summary.funded_rate:.3f} -> {out_dir}")
    return 0


def cmd_verify(args) -> int:
    scenario, out_dir, seed = _prepare(args)
    claims = [c.strip() for c in args.claims.split(",") if c.strip()]
    try:
        reports = run_claims(scenario, claims, seed=seed, grid=GridSpec(mc_runs=args.runs))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    hard = [r for r in reports if r.hard_failure]
    documented = [r for r in reports if (not r.passed) and r.expected_documented]
    write_json(out_dir / "verification.json", {
        "claims": [r.to_dict() for r in reports],
        "summary": {
            "total": len(reports),
            "passed": sum(r.passed for r in reports),
            "hard_failures": len(hard),
            "expected_documented_failures": len(documented),
        },
        "seed": seed,
    })
    write_csv(
        out_dir / "verification.csv",
        ["claim", "passed", "expected_documented"],
        [[r.claim, r.passed, r.expected_documented] for r in reports],
    )
    write_manifest(out_dir, "verify", scenario, seed, {"claims": ",".join(claims),
                                                       "runs": args.runs})
    for r in reports:
        tag = "PASS" if r.passed else ("DOCUMENTED-FAIL" if r.expected_documented else "FAIL")
        print(f"  [{tag}] {r.claim}")
    print(f"verify: {len(reports)} reports, {len(hard)} hard failures -> {out_dir}")
    return 1 if hard else 0


def _sweep_values(raw: str) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ScenarioError(f"bad sweep range {raw!r}: {exc}") from exc
    if not values:
        raise ScenarioError("sweep range is empty")
    return values


def _apply_sweep(scenario: Scenario, param: str, value: float) -> Scenario:
    doc = scenario_to_dict(scenario)
    if param == "B_C":
        doc["config"]["contribution_budget"] = value
    elif param == "B_B":
        doc["config"]["belief_budget"] = value
    elif param == "H0":
        doc["config"]["provision_point"] = value
    elif param == "b0":
        for agent in doc["agents"]:
            agent["prior_belief"] = value
    elif param == "drift_gain":
        for agent in doc["agents"]:
            gen = agent["generator"]
            if gen["family"] == "bernoulli":
                gen["step_up"] = gen["step_up"] * value
                gen["step_down"] = gen["step_down"] * value
            elif gen["family"] in ("contribution_drift", "deadline_drift"):
                gen["gain"] = gen["gain"] * value
            elif gen["family"] == "custom" and "step" in gen:
                gen["step"] = gen["step"] * value
    else:
        raise ScenarioError(f"unknown sweep parameter {param!r}; valid: {', '.join(SWEEP_PARAMS)}")
    return scenario_from_dict(doc)


def cmd_sweep(args) -> int:
    scenario, out_dir, seed = _prepare(args)
    values = _sweep_values(args.range)
    rows = []
    for value in values:
        modified = _apply_sweep(scenario, args.param, value)
        summary = run_ensemble(modified, args.runs)
        overall_payoff = (
            sum(summary.mean_payoffs.values()) / len(summary.mean_payoffs)
            if summary.mean_payoffs else 0.0
        )
        metrics = {
            "b_star": belief_threshold(modified.cfg),
            "funded_rate": summary.funded_rate,
            "funded_se": summary.funded_se,
            "mean_contribution_epoch": summary.mean_contribution_epoch,
            "mean_race_stats": summary.mean_race_stats,
            "mean_payoff": overall_payoff,
            "mean_final_total": summary.mean_final_total,
        }
        for metric, result in metrics.items():
            rows.append([args.param, value, metric, result])
    write_csv(out_dir / "sweep.csv", ["parameter", "value", "metric", "result"], rows)
    write_manifest(out_dir, "sweep", scenario, seed,
                   {"param": args.param, "range": args.range, "runs": args.runs})
    print(f"sweep: {args.param} over {len(values)} values -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppcrowd",
        description="Provision-point crowdfunding: equilibrium tables, simulation, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs_default=None):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override (default: scenario value)")
        if runs_default is not None:
            p.add_argument("--runs", type=int, default=runs_default)

    p_eq = sub.add_parser("equilibrium", help="emit the per-agent strategy table")
    common(p_eq)
    p_eq.add_argument("--variant", choices=["paper", "rederived"], default=None,
                      help="low-class cap variant override")
    p_eq.set_defaults(func=cmd_equilibrium)

    p_sim = sub.add_parser("simulate", help="run a seeded ensemble and emit ledgers")
    common(p_sim, runs_default=1)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run numerical verification claims")
    common(p_ver, runs_default=10_000)
    p_ver.add_argument("--claims", default="all",
                       help=f"comma list of claim ids or 'all'; valid: {', '.join(CLAIM_IDS)}")
    p_ver.set_defaults(func=cmd_verify)

    p_sw = sub.add_parser("sweep", help="sweep one parameter and emit long-format CSV")
    common(p_sw, runs_default=50)
    p_sw.add_argument("--param", required=True, choices=list(SWEEP_PARAMS))
    p_sw.add_argument("--range", required=True, help="comma-separated values, e.g. 25,50,100")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MechanismError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
