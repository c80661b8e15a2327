import math

import pytest
from hypothesis import given, strategies as st

from ppcrowd import (
    Agent,
    BeliefClass,
    ProjectConfig,
    ScenarioError,
    classify_belief,
    expected_funded_payoff,
    expected_unfunded_payoff,
    realized_payoff,
)
from ppcrowd.model import PayoffContractError


class TestClassify:
    def test_boundary_is_high(self):
        assert classify_belief(0.5) is BeliefClass.HIGH

    def test_zero_is_low(self):
        assert classify_belief(0.0) is BeliefClass.LOW

    def test_just_below_half_is_low(self):
        assert classify_belief(0.49999) is BeliefClass.LOW

    def test_out_of_range_rejected(self):
        with pytest.raises(ScenarioError):
            classify_belief(1.2)
        with pytest.raises(ScenarioError):
            classify_belief(-0.1)

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_partition_is_total_and_exclusive(self, b):
        cls = classify_belief(b)
        assert (cls is BeliefClass.HIGH) == (b >= 0.5)
        assert (cls is BeliefClass.LOW) == (b < 0.5)


class TestRealizedPayoff:
    def test_high_funded(self, symmetric_cfg):
        # theta - x + reward
        assert realized_payoff(
            BeliefClass.HIGH, 10.0, 6.0, 2.0, 100.0, True, symmetric_cfg
        ) == pytest.approx(6.0)

    def test_high_unfunded_refund_share(self, symmetric_cfg):
        # (x / total) * refund budget = (5/50)*100
        assert realized_payoff(
            BeliefClass.HIGH, 10.0, 5.0, 2.0, 50.0, False, symmetric_cfg
        ) == pytest.approx(10.0)

    def test_low_unfunded_gets_reward_on_top(self, symmetric_cfg):
        assert realized_payoff(
            BeliefClass.LOW, 10.0, 5.0, 2.0, 50.0, False, symmetric_cfg
        ) == pytest.approx(12.0)

    def test_low_funded_no_reward(self, symmetric_cfg):
        assert realized_payoff(
            BeliefClass.LOW, 10.0, 5.0, 2.0, 100.0, True, symmetric_cfg
        ) == pytest.approx(5.0)

    def test_zero_contribution_high_unfunded_is_zero(self, symmetric_cfg):
        assert realized_payoff(BeliefClass.HIGH, 10.0, 0.0, 2.0, 30.0, False, symmetric_cfg) == 0.0

    def test_zero_contribution_low_reporter_keeps_reward(self, symmetric_cfg):
        # Reward attaches to the report, not the contribution; x = 0 still pays.
        assert realized_payoff(
            BeliefClass.LOW, 10.0, 0.0, 2.0, 30.0, False, symmetric_cfg
        ) == pytest.approx(2.0)

    def test_zero_total_with_zero_contribution(self, symmetric_cfg):
        assert realized_payoff(BeliefClass.LOW, 10.0, 0.0, 2.0, 0.0, False, symmetric_cfg) == 2.0

    def test_inconsistent_funded_flag_rejected(self, symmetric_cfg):
        with pytest.raises(PayoffContractError):
            realized_payoff(BeliefClass.HIGH, 10.0, 5.0, 2.0, 50.0, True, symmetric_cfg)

    def test_positive_contribution_zero_total_rejected(self, symmetric_cfg):
        with pytest.raises(PayoffContractError):
            realized_payoff(BeliefClass.HIGH, 10.0, 5.0, 2.0, 0.0, False, symmetric_cfg)

    @given(
        x=st.floats(min_value=0.01, max_value=40.0),
        total=st.floats(min_value=90.0, max_value=99.0),
    )
    def test_unfunded_payoff_linear_in_contribution(self, x, total, ):
        cfg = ProjectConfig(100.0, 80.0, 10.0, 2, 10)
        one = realized_payoff(BeliefClass.HIGH, 50.0, x, 0.0, total, False, cfg)
        two = realized_payoff(BeliefClass.HIGH, 50.0, 2 * x, 0.0, total, False, cfg)
        assert two == pytest.approx(2 * one, rel=1e-12)


class TestExpectedPayoffs:
    def test_high_funded_example(self):
        assert expected_funded_payoff(BeliefClass.HIGH, 0.6, 10.0, 9.0, 2.0) == pytest.approx(1.8)

    def test_low_funded_example(self):
        assert expected_funded_payoff(BeliefClass.LOW, 0.25, 10.0, 1.0, 0.0) == pytest.approx(2.25)

    def test_zero_belief_kills_funded_value(self):
        assert expected_funded_payoff(BeliefClass.HIGH, 0.0, 123.0, 4.0, 5.0) == 0.0

    def test_high_unfunded_example(self, skewed_cfg):
        got = expected_unfunded_payoff(BeliefClass.HIGH, 0.6, 9.0, 100.0, 0.0, skewed_cfg)
        assert got == pytest.approx(0.4 * (9.0 / 100.0) * 50.0)

    def test_low_unfunded_example(self, symmetric_cfg):
        got = expected_unfunded_payoff(BeliefClass.LOW, 0.25, 1.0, 100.0, 2.0, symmetric_cfg)
        assert got == pytest.approx(2.25)

    def test_certain_funding_zeroes_unfunded_value(self, symmetric_cfg):
        assert expected_unfunded_payoff(BeliefClass.HIGH, 1.0, 7.0, 100.0, 2.0, symmetric_cfg) == 0.0


class TestConfigAndAgent:
    def test_rejects_nonpositive_target(self):
        with pytest.raises(ScenarioError):
            ProjectConfig(0.0, 1.0, 1.0, 1, 1)

    def test_rejects_zero_budgets(self):
        with pytest.raises(ScenarioError):
            ProjectConfig(10.0, 0.0, 1.0, 1, 1)
        with pytest.raises(ScenarioError):
            ProjectConfig(10.0, 1.0, 0.0, 1, 1)

    def test_rejects_empty_phases(self):
        with pytest.raises(ScenarioError):
            ProjectConfig(10.0, 1.0, 1.0, 0, 5)

    def test_total_horizon(self, symmetric_cfg):
        assert symmetric_cfg.total_horizon == 13

    def test_agent_validation(self):
        with pytest.raises(ScenarioError):
            Agent(id=1, valuation=-1.0, prior_belief=0.5)
        with pytest.raises(ScenarioError):
            Agent(id=1, valuation=1.0, prior_belief=1.5)
