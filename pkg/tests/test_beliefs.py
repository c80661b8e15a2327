import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppcrowd import (
    BeliefWalk,
    ContributionDrift,
    CustomStep,
    DeadlineDrift,
    DriftClass,
    SymmetricBernoulli,
    WalkEnv,
    classify_generator,
    sample_path_matrix,
)
from ppcrowd.beliefs import generator_from_config
from ppcrowd.model import ScenarioError

ENV = WalkEnv(current_total=0.0, remaining_epochs=5, provision_point=100.0)


class TestStep:
    def test_single_additive_step(self):
        walk = BeliefWalk(1, 0.5, SymmetricBernoulli(1.0, 0.1, -0.1), master_seed=0)
        assert walk.step(ENV) == pytest.approx(0.6)

    def test_clamp_at_upper_boundary(self):
        walk = BeliefWalk(1, 0.95, SymmetricBernoulli(1.0, 0.1, -0.1), master_seed=0)
        assert walk.step(ENV) == 1.0
        assert walk.touched_boundary

    def test_zero_drift_fixed_point(self):
        # Pull toward total/target equals the current belief: no move.
        env = WalkEnv(50.0, 5, 100.0)
        walk = BeliefWalk(1, 0.5, ContributionDrift(gain=0.7, noise_scale=0.0), master_seed=0)
        assert walk.step(env) == pytest.approx(0.5)

    def test_deterministic_descent_path(self):
        walk = BeliefWalk(1, 0.5, SymmetricBernoulli(1.0, 0.1, -0.1), master_seed=3)
        out = walk.sample_path([ENV] * 3, 3)
        np.testing.assert_allclose(out, [0.6, 0.7, 0.8])

    def test_identical_seed_stream_bitwise_identical(self):
        gen = SymmetricBernoulli(0.5, 0.07, -0.05)
        a = BeliefWalk(1, 0.4, gen, rng_stream=(2, 9), master_seed=42)
        b = BeliefWalk(1, 0.4, gen, rng_stream=(2, 9), master_seed=42)
        pa = a.sample_path([ENV] * 8, 8)
        pb = b.sample_path([ENV] * 8, 8)
        assert pa.tobytes() == pb.tobytes()

    def test_distinct_streams_differ(self):
        gen = SymmetricBernoulli(0.5, 0.07, -0.05)
        a = BeliefWalk(1, 0.4, gen, rng_stream=(0, 1), master_seed=42)
        b = BeliefWalk(1, 0.4, gen, rng_stream=(0, 2), master_seed=42)
        assert list(a.sample_path([ENV] * 8, 8)) != list(b.sample_path([ENV] * 8, 8))

    def test_horizon_exceeding_env_stream_rejected(self):
        walk = BeliefWalk(1, 0.5, SymmetricBernoulli(0.5, 0.1, -0.1), master_seed=0)
        with pytest.raises(ScenarioError):
            walk.sample_path([ENV] * 2, 3)


class TestBoundarySafety:
    @given(
        p=st.floats(min_value=0.0, max_value=1.0),
        up=st.floats(min_value=1e-6, max_value=2.0),
        down=st.floats(min_value=-2.0, max_value=-1e-6),
        b0=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_all_emitted_beliefs_in_unit_interval(self, p, up, down, b0):
        walk = BeliefWalk(1, b0, SymmetricBernoulli(p, up, down), master_seed=1)
        path = walk.sample_path([ENV] * 12, 12)
        assert np.all(path >= 0.0) and np.all(path <= 1.0)

    def test_interior_martingale_mean_preserved(self):
        # Ensemble mean of a zero-drift walk stays at b0 within 3 sigma while
        # no path has touched a boundary.
        gen = SymmetricBernoulli(0.5, 0.01, -0.01)
        paths, touched = sample_path_matrix(gen, 0.5, 30_000, 10, seed=(7, 1))
        assert not touched.any()
        final = paths[:, -1]
        se = final.std(ddof=1) / np.sqrt(len(final))
        assert abs(final.mean() - 0.5) <= 3 * se


class TestClassification:
    def test_zero_mean_is_martingale(self):
        gen = SymmetricBernoulli(0.5, 0.1, -0.1)
        assert classify_generator(gen, [ENV]) is DriftClass.MARTINGALE

    def test_downward_bernoulli_is_super(self):
        gen = SymmetricBernoulli(0.4, 0.1, -0.1)
        assert classify_generator(gen, [ENV]) is DriftClass.SUPER_MARTINGALE

    def test_upward_bernoulli_is_sub(self):
        gen = SymmetricBernoulli(0.6, 0.1, -0.1)
        assert classify_generator(gen, [ENV]) is DriftClass.SUB_MARTINGALE

    def test_classification_matches_analytic_sign_exactly(self):
        for p in (0.0, 0.2, 0.5, 0.8, 1.0):
            for up, down in ((0.1, -0.1), (0.02, -0.08)):
                gen = SymmetricBernoulli(p, up, down)
                mean = p * up + (1 - p) * down
                got = classify_generator(gen, [ENV])
                if mean == 0:
                    assert got is DriftClass.MARTINGALE
                elif mean < 0:
                    assert got is DriftClass.SUPER_MARTINGALE
                else:
                    assert got is DriftClass.SUB_MARTINGALE

    def test_deadline_drift_is_super(self):
        gen = DeadlineDrift(gain=0.05, noise_scale=0.0, horizon=10)
        envs = [WalkEnv(0.0, r, 100.0) for r in range(0, 9)]
        assert classify_generator(gen, envs) is DriftClass.SUPER_MARTINGALE

    def test_contribution_drift_is_mixed_across_states(self):
        gen = ContributionDrift(gain=0.1, noise_scale=0.0)
        envs = [WalkEnv(0.0, 5, 100.0), WalkEnv(100.0, 5, 100.0)]
        assert classify_generator(gen, envs) is DriftClass.MIXED

    def test_custom_constant_classified_by_sampling(self):
        assert classify_generator(CustomStep("constant", {"step": 0.0}), [ENV]) \
            is DriftClass.MARTINGALE
        assert classify_generator(CustomStep("constant", {"step": -0.01}), [ENV]) \
            is DriftClass.SUPER_MARTINGALE
        assert classify_generator(CustomStep("constant", {"step": 0.01}), [ENV]) \
            is DriftClass.SUB_MARTINGALE

    def test_empty_env_ensemble_rejected(self):
        with pytest.raises(ScenarioError):
            classify_generator(SymmetricBernoulli(0.5, 0.1, -0.1), [])


class TestConfigRoundTrip:
    @pytest.mark.parametrize("cfg", [
        {"family": "bernoulli", "p": 0.3, "step_up": 0.02, "step_down": -0.04},
        {"family": "contribution_drift", "gain": 0.1, "noise_scale": 0.01},
        {"family": "deadline_drift", "gain": 0.2, "noise_scale": 0.0, "horizon": 10},
        {"family": "custom", "kind": "constant", "step": -0.01},
    ])
    def test_to_config_round_trips(self, cfg):
        gen = generator_from_config(cfg)
        assert generator_from_config(gen.to_config()).to_config() == gen.to_config()

    def test_unknown_family_rejected(self):
        with pytest.raises(ScenarioError):
            generator_from_config({"family": "levy_flight"})

    def test_bernoulli_sign_constraints(self):
        with pytest.raises(ScenarioError):
            SymmetricBernoulli(0.5, -0.1, -0.1)
        with pytest.raises(ScenarioError):
            SymmetricBernoulli(0.5, 0.1, 0.1)
