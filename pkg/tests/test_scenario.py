import pytest
import yaml

from ppcrowd import load_scenario, normalize_scenario, scenario_from_dict
from ppcrowd.model import ScenarioError
from ppcrowd.scenario import PolicySpec, scenario_to_dict

from conftest import all_scenario_files


def minimal_doc(**overrides):
    doc = {
        "name": "minimal",
        "master_seed": 1,
        "config": {
            "provision_point": 100.0,
            "contribution_budget": 50.0,
            "belief_budget": 5.0,
            "belief_deadline": 2,
            "contribution_deadline": 6,
        },
        "agents": [
            {"id": 1, "valuation": 120.0, "prior_belief": 0.6, "arrival_bp": 1,
             "arrival_cp": 1,
             "generator": {"family": "bernoulli", "p": 0.5, "step_up": 0.01,
                           "step_down": -0.01},
             "policy": {"kind": "equilibrium"}},
        ],
    }
    doc.update(overrides)
    return doc


class TestValidation:
    def test_minimal_loads(self):
        sc = scenario_from_dict(minimal_doc())
        assert sc.total_valuation == 120.0

    def test_no_agents_rejected(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_doc(agents=[]))

    def test_insufficient_interest_rejected(self):
        doc = minimal_doc()
        doc["agents"][0]["valuation"] = 90.0
        with pytest.raises(ScenarioError, match="insufficient interest"):
            scenario_from_dict(doc)

    def test_arrival_beyond_phase_rejected(self):
        doc = minimal_doc()
        doc["agents"][0]["arrival_cp"] = 7
        with pytest.raises(ScenarioError, match="arrival_cp"):
            scenario_from_dict(doc)

    def test_duplicate_ids_rejected(self):
        doc = minimal_doc()
        doc["agents"].append(dict(doc["agents"][0]))
        with pytest.raises(ScenarioError, match="duplicate"):
            scenario_from_dict(doc)

    def test_unknown_generator_family_rejected(self):
        doc = minimal_doc()
        doc["agents"][0]["generator"] = {"family": "nope"}
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_unknown_policy_rejected(self):
        doc = minimal_doc()
        doc["agents"][0]["policy"] = {"kind": "telepathy"}
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_missing_required_key_rejected(self):
        doc = minimal_doc()
        del doc["config"]["provision_point"]
        with pytest.raises(ScenarioError, match="provision_point"):
            scenario_from_dict(doc)

    def test_defaults_fill_agent_fields(self):
        doc = minimal_doc()
        doc["defaults"] = {"generator": doc["agents"][0].pop("generator")}
        sc = scenario_from_dict(doc)
        assert sc.generators[1].to_config()["family"] == "bernoulli"

    def test_bad_variant_rejected(self):
        doc = minimal_doc()
        doc["config"]["low_cap_variant"] = "imaginary"
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)


class TestRoundTrip:
    def test_normalize_is_idempotent(self):
        sc = scenario_from_dict(minimal_doc())
        text1 = normalize_scenario(sc)
        sc2 = scenario_from_dict(yaml.safe_load(text1))
        text2 = normalize_scenario(sc2)
        assert text1 == text2

    def test_round_trip_preserves_semantics(self):
        sc = scenario_from_dict(minimal_doc())
        again = scenario_from_dict(scenario_to_dict(sc))
        assert scenario_to_dict(again) == scenario_to_dict(sc)

    @pytest.mark.parametrize("path", all_scenario_files(), ids=lambda p: p.stem)
    def test_shipped_scenarios_load_and_round_trip(self, path):
        sc = load_scenario(path)
        text1 = normalize_scenario(sc)
        sc2 = scenario_from_dict(yaml.safe_load(text1))
        assert normalize_scenario(sc2) == text1


class TestPolicySpec:
    def test_fixed_requires_amount_and_epoch(self):
        with pytest.raises(ScenarioError):
            PolicySpec.from_config({"kind": "fixed", "amount": 3.0})

    def test_round_trip(self):
        for cfg in ({"kind": "equilibrium"},
                    {"kind": "fixed", "amount": 2.0, "epoch": 3},
                    {"kind": "greedy", "fraction": 0.25}):
            spec = PolicySpec.from_config(cfg)
            assert PolicySpec.from_config(spec.to_config()) == spec
