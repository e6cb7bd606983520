"""Simulation oracles: samplers, exact transitions, DP value, MC evaluation."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import kstest

from gasplant.market import (
    InverseGaussian,
    JumpSpec,
    ModelSpec,
    PointMass,
    TruncatedNormal,
    jump_cdf,
)
from gasplant.oracle import (
    PathConfig,
    deterministic_value,
    evaluate_policy_mc,
    jump_size_quantile,
    sample_jump_sizes,
    simulate_path,
    simulate_regime_chain,
)
from gasplant.plant import PlantSpec
from gasplant.solver import GridSpec, HJBSolver
from gasplant.copula import Independence
from tests.conftest import degenerate_model, degenerate_regime, flat_seasonality

PLANT = PlantSpec()


class TestJumpSampling:
    def test_ig_sampler_matches_cdf(self):
        dist = InverseGaussian(0.60, 0.56)
        rng = np.random.default_rng(7)
        x = sample_jump_sizes(dist, 20000, rng)
        assert np.all(x > 0)
        stat = kstest(x, lambda v: jump_cdf(JumpSpec(1.0, dist), v))
        assert stat.pvalue > 1e-3

    def test_ig_sampler_moments(self):
        dist = InverseGaussian(0.54, 0.32)
        rng = np.random.default_rng(11)
        x = sample_jump_sizes(dist, 200000, rng)
        assert x.mean() == pytest.approx(0.54, rel=0.01)
        # Var = mu^3 / lambda
        assert x.var() == pytest.approx(0.54**3 / 0.32, rel=0.05)

    def test_truncated_normal_positive_and_centered(self):
        dist = TruncatedNormal(700.0, 100.0)
        rng = np.random.default_rng(3)
        x = sample_jump_sizes(dist, 50000, rng)
        assert np.all(x > 0)
        assert x.mean() == pytest.approx(700.0, rel=0.01)

    def test_point_mass_sampler(self):
        rng = np.random.default_rng(0)
        assert np.all(sample_jump_sizes(PointMass(2.0), 5, rng) == 2.0)

    def test_quantile_inverts_cdf(self):
        for dist in (InverseGaussian(0.6, 0.56), TruncatedNormal(1.0, 2.0)):
            j = JumpSpec(1.0, dist)
            p = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
            x = jump_size_quantile(dist, p)
            assert np.allclose(jump_cdf(j, x), p, atol=1e-9)

    def test_quantile_monotone(self):
        q = jump_size_quantile(InverseGaussian(0.6, 0.56), np.linspace(0.01, 0.99, 50))
        assert np.all(np.diff(q) > 0)


class TestRegimeChain:
    def _model(self, r0=0.5, r1=2.0):
        regs = (
            replace(degenerate_regime(), switch_rate=r0),
            replace(degenerate_regime(), switch_rate=r1),
        )
        return ModelSpec(regs, 0.0, 100.0)

    def test_alternating_states_from_zero(self):
        rng = np.random.default_rng(1)
        path = simulate_regime_chain(self._model(), 100.0, rng)
        assert path.states[0] == 0
        assert np.all(np.abs(np.diff(path.states)) == 1)
        assert np.all(np.diff(path.switch_times) > 0)

    def test_sojourn_means(self):
        rng = np.random.default_rng(5)
        s0, s1 = [], []
        for _ in range(400):
            path = simulate_regime_chain(self._model(), 200.0, rng)
            soj = path.sojourns()
            states = path.states[:-1]
            s0.extend(soj[states == 0])
            s1.extend(soj[states == 1])
        assert np.mean(s0) == pytest.approx(1 / 0.5, rel=0.05)
        assert np.mean(s1) == pytest.approx(1 / 2.0, rel=0.05)

    def test_zero_rate_never_leaves(self):
        rng = np.random.default_rng(2)
        path = simulate_regime_chain(self._model(r0=0.0), 50.0, rng)
        assert len(path.states) == 1
        assert path.at(25.0) == 0

    def test_at_lookup(self):
        import numpy as np

        path_times = np.array([0.0, 3.0, 7.0])
        from gasplant.oracle import RegimePath

        path = RegimePath(path_times, np.array([0, 1, 0]))
        assert list(path.at([0.0, 2.9, 3.0, 6.9, 7.0, 10.0])) == [0, 0, 1, 1, 0, 0]


class TestPathSimulation:
    def test_ou_moments_match_exact_transition(self):
        reg = replace(
            degenerate_regime(40.0, 5.0), alpha_e=0.3, sigma_e=0.5, alpha_g=0.3
        )
        model = ModelSpec((reg,), 0.0, 4.0)
        cfg = PathConfig(step=4.0, paths=200000, seed=9)
        _, S_e, _ = simulate_path(model, cfg, 50.0, 5.0)
        # one exact step of length 4: mean reverts toward the flat level 40
        m_expect = 40.0 + (50.0 - 40.0) * math.exp(-0.3 * 4.0)
        sd_expect = 0.5 * math.sqrt((1 - math.exp(-2 * 0.3 * 4.0)) / (2 * 0.3))
        assert S_e[:, -1].mean() == pytest.approx(m_expect, abs=4 * sd_expect / 400)
        assert S_e[:, -1].std() == pytest.approx(sd_expect, rel=0.01)

    def test_correlation_of_driving_noise(self):
        reg = replace(
            degenerate_regime(40.0, 5.0), sigma_e=0.3, sigma_g=0.2, rho=0.8
        )
        model = ModelSpec((reg,), 0.0, 1.0)
        cfg = PathConfig(step=1.0, paths=100000, seed=12)
        _, S_e, S_g = simulate_path(model, cfg, 40.0, 5.0)
        r = np.corrcoef(S_e[:, -1], S_g[:, -1])[0, 1]
        assert r == pytest.approx(0.8, abs=0.01)

    def test_jump_mode_none_is_pure_diffusion(self):
        reg = replace(
            degenerate_regime(40.0, 5.0),
            sigma_e=0.0,
            jump_e=JumpSpec(5.0, PointMass(1.0)),
        )
        model = ModelSpec((reg,), 0.0, 2.0)
        cfg = PathConfig(step=0.5, paths=100, seed=1, jump_dependence_mode="none")
        _, S_e, _ = simulate_path(model, cfg, 40.0, 5.0)
        assert np.allclose(S_e, 40.0)

    def test_independent_jump_flow_matches_intensity(self):
        reg = replace(
            degenerate_regime(0.0, 0.0),
            jump_e=JumpSpec(0.5, PointMass(2.0)),
        )
        model = ModelSpec((reg,), 0.0, 10.0)
        cfg = PathConfig(step=0.1, paths=20000, seed=4, jump_dependence_mode="independent")
        _, S_e, _ = simulate_path(model, cfg, 0.0, 0.0)
        # total accumulated jumps: lambda * m * T = 0.5 * 2 * 10
        assert S_e[:, -1].mean() == pytest.approx(10.0, rel=0.02)

    def test_comonotone_jumps_are_rank_matched(self):
        dist = InverseGaussian(0.6, 0.56)
        reg = replace(
            degenerate_regime(0.0, 0.0),
            jump_e=JumpSpec(0.4, dist),
            jump_g=JumpSpec(0.4, dist),
        )
        model = ModelSpec((reg,), 0.0, 1.0)
        cfg = PathConfig(step=1.0, paths=50000, seed=8, jump_dependence_mode="comonotone")
        _, S_e, S_g = simulate_path(model, cfg, 0.0, 0.0)
        # equal margins and full comonotonicity: both coordinates jump
        # together by the same amount
        assert np.allclose(S_e[:, -1], S_g[:, -1], atol=1e-9)

    def test_seed_determinism(self):
        model = degenerate_model()
        cfg = PathConfig(step=0.5, paths=50, seed=42)
        out1 = simulate_path(model, cfg, 50.0, 10.0)
        out2 = simulate_path(model, cfg, 50.0, 10.0)
        assert np.array_equal(out1[1], out2[1])
        assert np.array_equal(out1[2], out2[2])


class TestDeterministicValue:
    def test_hot_plant_annuity(self):
        """At L = 600 with strongly profitable prices the optimal policy
        holds temperature and the value is a closed-form annuity."""
        model = degenerate_model(100.0, 0.1, horizon=50.0)
        rate = model.discount_rate
        W = deterministic_value(model, PLANT, 600.0, 100.0, 0.1, dL=2.0, dtau=0.05)
        from gasplant.plant import control_bounds, output

        c_hold, _ = control_bounds(PLANT, 600.0)
        flow = output(PLANT, 600.0) * 100.0 - 0.1 * c_hold
        annuity = flow * (1 - math.exp(-rate * 50.0)) / rate
        assert W == pytest.approx(annuity, rel=5e-3)

    def test_worthless_plant_stays_cold(self):
        model = degenerate_model(0.0, 10.0, horizon=50.0)
        W = deterministic_value(model, PLANT, 20.0, 0.0, 10.0, dL=2.0, dtau=0.05)
        assert W == pytest.approx(0.0, abs=1e-9)

    def test_rejects_stochastic_models(self):
        reg = replace(degenerate_regime(), sigma_e=0.1)
        model = ModelSpec((reg,), 0.05, 10.0)
        with pytest.raises(ValueError):
            deterministic_value(model, PLANT, 300.0, 50.0, 10.0)


@pytest.fixture(scope="module")
def solved():
    model = degenerate_model(60.0, 5.0, horizon=30.0)
    grid = GridSpec(S_e_max=120, S_g_max=10, N_e=8, N_g=4, N_L=24)
    solver = HJBSolver(model, PLANT, Independence(), grid)
    res = solver.solve(list(np.linspace(0.0, 30.0, 31)))
    return model, grid, res


class TestPolicyEvaluation:

    def test_mc_reproducible_for_fixed_seed(self, solved):
        model, grid, res = solved
        cfg = PathConfig(step=0.25, paths=64, seed=17)
        v1 = evaluate_policy_mc(model, PLANT, grid, res.policy, cfg, 60.0, 5.0, 450.0)
        v2 = evaluate_policy_mc(model, PLANT, grid, res.policy, cfg, 60.0, 5.0, 450.0)
        assert v1 == v2

    def test_mc_tracks_dp_on_degenerate_model(self, solved):
        model, grid, res = solved
        cfg = PathConfig(step=0.1, paths=8, seed=5)
        mc, se = evaluate_policy_mc(model, PLANT, grid, res.policy, cfg, 60.0, 5.0, 450.0)
        assert se == pytest.approx(0.0, abs=1e-9)  # no noise in a degenerate model
        dp = deterministic_value(model, PLANT, 450.0, 60.0, 5.0, dL=1.0, dtau=0.02)
        assert mc == pytest.approx(dp, rel=0.05)
