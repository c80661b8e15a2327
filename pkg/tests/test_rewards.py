import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppcrowd import (
    BeliefClass,
    BeliefReport,
    QuadraticProxyScorer,
    UniformScorer,
    compute_bbr,
    score_reports,
)
from ppcrowd.model import DegenerateScoresError, ScenarioError


def uniform_weights(epochs):
    reports = [BeliefReport(i + 1, 0.6, e) for i, e in enumerate(epochs)]
    return score_reports(reports, UniformScorer())


class TestScoreReports:
    def test_running_normalization_over_reporters_so_far(self):
        sv = uniform_weights([1, 2, 3])
        np.testing.assert_allclose(sv.weights, [1.0, 0.5, 1.0 / 3.0])

    def test_single_reporter_takes_weight_one(self):
        sv = uniform_weights([4])
        np.testing.assert_allclose(sv.weights, [1.0])

    def test_simultaneous_reports_share_denominator(self):
        sv = uniform_weights([1, 1])
        np.testing.assert_allclose(sv.weights, [0.5, 0.5])

    def test_empty_reports_empty_vector(self):
        sv = score_reports([], UniformScorer())
        assert sv.agent_ids == [] and len(sv.weights) == 0

    def test_earlier_reporter_weakly_heavier(self):
        sv = uniform_weights([1, 2, 2, 5])
        ws = dict(zip(sv.agent_ids, sv.weights))
        assert ws[1] >= ws[2] >= ws[4]

    def test_duplicate_ids_rejected(self):
        reports = [BeliefReport(1, 0.6, 1), BeliefReport(1, 0.7, 2)]
        with pytest.raises(ScenarioError):
            score_reports(reports, UniformScorer())

    def test_negative_scores_rejected(self):
        class BadScorer:
            def score(self, reports):
                return [-1.0] * len(reports)

        with pytest.raises(DegenerateScoresError):
            score_reports([BeliefReport(1, 0.6, 1)], BadScorer())

    def test_quadratic_proxy_prefers_closer_reports(self):
        reports = [BeliefReport(1, 0.9, 1), BeliefReport(2, 0.2, 1)]
        sv = score_reports(reports, QuadraticProxyScorer(reference=1.0))
        assert sv.raw[0] > sv.raw[1]


class TestComputeBbr:
    def test_sole_member_takes_whole_budget(self):
        sv = uniform_weights([1])
        m = compute_bbr(sv, {1: BeliefClass.HIGH}, 10.0)
        assert m == {1: 10.0}

    def test_proportional_split_two_to_one(self):
        sv = uniform_weights([1, 2])  # weights 1 and 1/2
        m = compute_bbr(sv, {1: BeliefClass.HIGH, 2: BeliefClass.HIGH}, 9.0)
        assert m[1] == pytest.approx(6.0)
        assert m[2] == pytest.approx(3.0)

    def test_empty_class_gets_nothing(self):
        sv = uniform_weights([1, 2])
        m = compute_bbr(sv, {1: BeliefClass.HIGH, 2: BeliefClass.HIGH}, 7.0)
        assert sum(m.values()) == pytest.approx(7.0)
        assert set(m) == {1, 2}

    def test_each_nonempty_class_sums_to_budget(self):
        sv = uniform_weights([1, 2, 3, 4])
        classes = {1: BeliefClass.HIGH, 2: BeliefClass.LOW,
                   3: BeliefClass.HIGH, 4: BeliefClass.LOW}
        m = compute_bbr(sv, classes, 12.0)
        high = sum(v for k, v in m.items() if classes[k] is BeliefClass.HIGH)
        low = sum(v for k, v in m.items() if classes[k] is BeliefClass.LOW)
        assert high == pytest.approx(12.0, rel=1e-9)
        assert low == pytest.approx(12.0, rel=1e-9)

    def test_all_zero_weights_in_class_rejected(self):
        class ZeroScorer:
            def score(self, reports):
                return [0.0] * len(reports)

        sv = score_reports([BeliefReport(1, 0.6, 1)], ZeroScorer())
        with pytest.raises(DegenerateScoresError):
            compute_bbr(sv, {1: BeliefClass.HIGH}, 5.0)

    def test_permuting_simultaneous_ids_permutes_rewards(self):
        a = [BeliefReport(1, 0.7, 1), BeliefReport(2, 0.7, 1)]
        b = [BeliefReport(2, 0.7, 1), BeliefReport(1, 0.7, 1)]
        classes = {1: BeliefClass.HIGH, 2: BeliefClass.HIGH}
        ma = compute_bbr(score_reports(a, UniformScorer()), classes, 4.0)
        mb = compute_bbr(score_reports(b, UniformScorer()), classes, 4.0)
        assert ma == mb
        assert ma[1] == ma[2]

    @given(
        epochs=st.lists(st.integers(min_value=1, max_value=9), min_size=1, max_size=8),
        budget=st.floats(min_value=0.5, max_value=500.0),
        split=st.integers(min_value=0, max_value=255),
    )
    @settings(max_examples=100, deadline=None)
    def test_budget_identity_and_nonnegativity(self, epochs, budget, split):
        reports = [BeliefReport(i + 1, 0.8 if (split >> (i % 8)) & 1 else 0.2, e)
                   for i, e in enumerate(epochs)]
        classes = {r.agent_id: (BeliefClass.HIGH if r.belief >= 0.5 else BeliefClass.LOW)
                   for r in reports}
        m = compute_bbr(score_reports(reports, UniformScorer()), classes, budget)
        assert all(v >= 0 for v in m.values())
        for cls in (BeliefClass.HIGH, BeliefClass.LOW):
            members = [v for k, v in m.items() if classes[k] is cls]
            if members:
                assert sum(members) == pytest.approx(budget, rel=1e-9)
