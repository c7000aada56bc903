import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from impactlab import (
    ModelParams,
    SimGrid,
    condition_on_terminal,
    cov_rate_total_quantity,
    emini_params,
    propagate_impact,
    simulate_mid_and_fills,
    simulate_rate_path,
    stationary_rate_moments,
    substream,
    var_total_quantity,
)
from impactlab.engine import simulate_rate_block
from impactlab.model import (
    conditioning_gain,
    cumulative_trapezoid,
    impact_state_from_rates,
    ou_step_coefficients,
    trapezoid_weights,
)


def twap_impact_exact(params, t):
    """Closed-form impact of a constant-rate schedule at time t (oracle)."""
    m, tm = params.twap_rate, params.tau_m
    return params.lam * m * tm * (1.0 - math.exp(-t / tm))


class TestParams:
    def test_table_defaults(self, params):
        assert params.q_total == 2000
        assert params.horizon == 390
        assert params.twap_rate == pytest.approx(2000 / 390)
        # volatility normalized to 50 points (1%) over the order
        assert params.sigma_m * math.sqrt(params.horizon) == pytest.approx(50.0)
        assert round(params.sigma_m, 3) == 2.532

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            emini_params(horizon=-1.0)
        with pytest.raises(ValueError):
            emini_params(tau_q=0.0)
        with pytest.raises(ValueError):
            emini_params(point_value=0.0)
        with pytest.raises(ValueError):
            emini_params(sigma_q=-0.1)

    def test_short_order_warning(self):
        with pytest.warns(UserWarning, match="short-order"):
            emini_params(tau_m=150.0, tau_q=50.0)
        # Table values are comfortably in the long-order regime: no warning
        emini_params()

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            SimGrid(dt=0.0, n_steps=10)
        with pytest.raises(ValueError):
            SimGrid(dt=0.1, n_steps=1)
        with pytest.raises(ValueError):
            SimGrid(dt=0.1, n_steps=100).check_horizon(390.0)
        SimGrid.from_horizon(390.0, 0.1).check_horizon(390.0)


class TestStationaryMoments:
    def test_table_values(self, params):
        mean, var = stationary_rate_moments(params)
        assert mean == pytest.approx(5.1282, abs=1e-4)
        assert var == pytest.approx(16.436, abs=1e-3)
        assert math.sqrt(var) == pytest.approx(4.054, abs=1e-3)

    def test_zero_vol(self, params):
        _, var = stationary_rate_moments(emini_params(sigma_q=0.0))
        assert var == 0.0

    def test_matches_sample_variance(self, params, rate_block_cache):
        # 2e4 stationary draws at a fixed time; sd accurate to ~0.5%
        _, var = stationary_rate_moments(params)
        sample_var = rate_block_cache[:, 0].var(ddof=1)
        assert sample_var == pytest.approx(var, rel=0.02)


class TestRatePath:
    def test_deterministic_twap_limit(self, grid):
        p = emini_params(sigma_q=0.0)
        path = simulate_rate_path(p, grid, substream(0, 0, 0))
        assert np.allclose(path.q, p.twap_rate)
        assert path.q_cum[-1] == pytest.approx(2000.0)
        assert not path.conditioned

    def test_stationarity_all_times(self, params, rate_block_cache, coarse_grid):
        # marginal law identical at t=0 and t=T/2 (Kolmogorov-Smirnov, 1% level)
        mid = coarse_grid.n_steps // 2
        res = stats.ks_2samp(rate_block_cache[:, 0], rate_block_cache[:, mid])
        assert res.pvalue > 0.01

    def test_fixed_time_sd_matches_stationary(self, params, rate_block_cache):
        _, var = stationary_rate_moments(params)
        for col in (100, 400, 780):
            assert rate_block_cache[:, col].std(ddof=1) == pytest.approx(
                math.sqrt(var), rel=0.01 * 3
            )

    def test_terminal_quantity_sd(self, params, rate_block_cache, coarse_grid):
        # closed-form Var[Q_T] (exact stationary double integral) vs Monte Carlo
        w = trapezoid_weights(coarse_grid)
        q_t = rate_block_cache @ w
        assert math.sqrt(var_total_quantity(params)) == pytest.approx(251.56, abs=0.01)
        assert q_t.std(ddof=1) == pytest.approx(251.56, rel=0.02)

    @given(
        dt=st.floats(0.01, 2.0),
        tau_q=st.floats(0.5, 50.0),
        q0_offset=st.floats(-3.0, 3.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_exact_ou_transition_moments(self, dt, tau_q, q0_offset):
        # one-step conditional mean and variance match the continuous-time law
        p = emini_params(tau_q=tau_q, tau_m=1.0)
        mean, var = stationary_rate_moments(p)
        decay, step_sd = ou_step_coefficients(p, dt)
        assert decay == pytest.approx(math.exp(-dt / tau_q), rel=1e-12)
        assert step_sd**2 == pytest.approx(var * (1 - math.exp(-2 * dt / tau_q)), rel=1e-12)
        # statistical check of the realized one-step transition
        q0 = mean + q0_offset * math.sqrt(var)
        rng = np.random.default_rng(7)
        steps = mean + (q0 - mean) * decay + step_sd * rng.standard_normal(50_000)
        assert steps.mean() == pytest.approx(mean + (q0 - mean) * decay, abs=5 * step_sd / math.sqrt(50_000))
        assert steps.var(ddof=1) == pytest.approx(step_sd**2, rel=0.05)

    def test_engine_block_equals_single_path(self, params, grid):
        block = simulate_rate_block(params, grid, np.arange(3), master_seed=99)
        for i in range(3):
            path = simulate_rate_path(params, grid, substream(99, i, 0))
            assert np.allclose(block[i], path.q, rtol=1e-12, atol=1e-12)


class TestCovKernel:
    def test_endpoint_value(self, params):
        assert cov_rate_total_quantity(0.0, params) == pytest.approx(82.18, abs=0.01)

    def test_zero_vol(self):
        assert cov_rate_total_quantity(100.0, emini_params(sigma_q=0.0)) == 0.0

    def test_symmetry(self, params):
        for t in (0.0, 17.3, 100.0, 370.0):
            assert cov_rate_total_quantity(t, params) == pytest.approx(
                cov_rate_total_quantity(params.horizon - t, params), rel=1e-12
            )

    def test_domain(self, params):
        with pytest.raises(ValueError):
            cov_rate_total_quantity(-1.0, params)
        with pytest.raises(ValueError):
            cov_rate_total_quantity(391.0, params)

    def test_integrates_to_var_qt(self, params, grid):
        # Cov[q_t, Q_T] integrated over [0, T] is Var[Q_T] by definition
        vals = cov_rate_total_quantity(grid.times, params)
        integral = float(np.dot(vals, trapezoid_weights(grid)))
        assert integral == pytest.approx(var_total_quantity(params), rel=1e-5)

    def test_mc_covariance_oracle(self, params, rate_block_cache, coarse_grid):
        # sample Cov[q_t, Q_T] within 5 standard errors of the kernel, several t
        w = trapezoid_weights(coarse_grid)
        q_t = rate_block_cache @ w
        n = rate_block_cache.shape[0]
        _, var_q = stationary_rate_moments(params)
        var_qt = var_total_quantity(params)
        for col in (0, 200, coarse_grid.n_steps // 2, coarse_grid.n_steps):
            expected = cov_rate_total_quantity(coarse_grid.times[col], params)
            se = math.sqrt((var_q * var_qt + expected**2) / n)
            sample_cov = np.cov(rate_block_cache[:, col], q_t)[0, 1]
            assert abs(sample_cov - expected) < 5 * se


class TestConditioning:
    def test_terminal_exact(self, params, grid):
        for seed in range(5):
            path = simulate_rate_path(params, grid, substream(5, seed, 0))
            cond = condition_on_terminal(path, params, grid)
            assert cond.conditioned
            assert abs(cond.q_cum[-1] - params.q_total) < 1e-6 * params.q_total

    def test_idempotent_bitwise(self, params, grid):
        path = simulate_rate_path(params, grid, substream(6, 0, 0))
        once = condition_on_terminal(path, params, grid)
        twice = condition_on_terminal(once, params, grid)
        assert np.array_equal(once.q, twice.q)

    def test_degenerate_rejected(self, grid):
        p = emini_params(sigma_q=0.0)
        path = simulate_rate_path(p, grid, substream(0, 0, 0))
        # TWAP path already hits the target: accepted as-is
        cond = condition_on_terminal(path, p, grid)
        assert cond.conditioned
        bad = type(path)(q=path.q * 1.5, q_cum=path.q_cum * 1.5, conditioned=False)
        with pytest.raises(ValueError, match="degenerate conditioning"):
            condition_on_terminal(bad, p, grid)

    def test_conditional_mean_and_variance(self, params, coarse_grid):
        # Gaussian-conditioning identities at t = T/2, Monte Carlo oracle
        n = 20_000
        block = simulate_rate_block(params, coarse_grid, np.arange(n), 77, conditioned=True)
        w = trapezoid_weights(coarse_grid)
        mid = coarse_grid.n_steps // 2
        q_cum_mid = cumulative_trapezoid(block, coarse_grid.dt)[:, mid]
        assert q_cum_mid.mean() == pytest.approx(params.q_total / 2, abs=5 * q_cum_mid.std() / math.sqrt(n))

        _, var_q = stationary_rate_moments(params)
        t_mid = coarse_grid.times[mid]
        expected_var = var_q - cov_rate_total_quantity(t_mid, params) ** 2 / var_total_quantity(params)
        assert block[:, mid].var(ddof=1) == pytest.approx(expected_var, rel=0.02)

    def test_gain_normalization(self, params, grid):
        gain = conditioning_gain(params, grid)
        assert float(np.dot(gain, trapezoid_weights(grid))) == pytest.approx(1.0, rel=1e-14)


class TestImpact:
    def test_twap_plateau(self, grid):
        p = emini_params(sigma_q=0.0)
        path = simulate_rate_path(p, grid, substream(0, 0, 0))
        impact = propagate_impact(path, p, grid)
        assert impact[0] == 0.0
        assert impact[-1] == pytest.approx(1.49993, abs=2e-5)
        assert impact[-1] == pytest.approx(twap_impact_exact(p, p.horizon), rel=1e-6)

    def test_zero_lambda(self, params, grid):
        path = simulate_rate_path(params, grid, substream(1, 0, 0))
        assert np.all(propagate_impact(path, emini_params(lam=0.0), grid) == 0.0)

    def test_single_step_refinement_oracle(self):
        # one step from rest with constant rate, against the dt-refined integral
        p = emini_params(sigma_q=0.0)
        q = np.full(2, 3.0)
        coarse = impact_state_from_rates(q, p.tau_m, 0.5)[-1]
        fine = impact_state_from_rates(np.full(11, 3.0), p.tau_m, 0.05)[-1]
        exact = 3.0 * p.tau_m * (1 - math.exp(-0.5 / p.tau_m))
        assert coarse == pytest.approx(exact, rel=1e-4)
        assert abs(fine - exact) < abs(coarse - exact)

    def test_second_order_convergence(self):
        # halving dt divides the terminal TWAP impact error by ~4
        p = emini_params(sigma_q=0.0)
        errors = []
        for dt in (1.0, 0.5, 0.25):
            g = SimGrid.from_horizon(p.horizon, dt)
            q = np.full(g.n_steps + 1, p.twap_rate)
            terminal = p.lam * impact_state_from_rates(q, p.tau_m, dt)[-1]
            errors.append(abs(terminal - twap_impact_exact(p, p.horizon)))
        for coarse, fine in zip(errors, errors[1:]):
            assert coarse / fine == pytest.approx(4.0, abs=0.5)


class TestMidAndFills:
    def test_deterministic_mid(self, grid):
        p = emini_params(sigma_q=0.0, sigma_m=0.0)
        path = simulate_rate_path(p, grid, substream(0, 0, 0))
        impact = propagate_impact(path, p, grid)
        prices = simulate_mid_and_fills(path, impact, p, grid, substream(0, 0, 1))
        assert prices.mid[0] == p.m0
        assert prices.mid[-1] - p.m0 == pytest.approx(1.49993, abs=2e-5)

    def test_zero_spread_capture(self, params, grid):
        p = emini_params(a=0.0)
        path = simulate_rate_path(p, grid, substream(2, 0, 0))
        impact = propagate_impact(path, p, grid)
        prices = simulate_mid_and_fills(path, impact, p, grid, substream(2, 0, 1))
        assert np.array_equal(prices.fill, prices.mid)

    def test_spread_premium_follows_order_direction(self, params, grid):
        path = simulate_rate_path(params, grid, substream(3, 0, 0))
        impact = propagate_impact(path, params, grid)
        prices = simulate_mid_and_fills(path, impact, params, grid, substream(3, 0, 1))
        assert np.allclose(prices.fill - prices.mid, params.a * params.spread)
        sell = emini_params(q_total=-2000.0)
        path_s = simulate_rate_path(sell, grid, substream(3, 0, 0))
        prices_s = simulate_mid_and_fills(
            path_s, propagate_impact(path_s, sell, grid), sell, grid, substream(3, 0, 1)
        )
        assert np.allclose(prices_s.fill - prices_s.mid, -sell.a * sell.spread)

    def test_noise_scale(self, params, coarse_grid):
        # sd of the terminal mid noise is sigma_m * sqrt(T) = 50 points
        n = 8000
        ends = np.array([
            simulate_mid_and_fills(
                _twap_path(params, coarse_grid),
                np.zeros(coarse_grid.n_steps + 1),
                emini_params(lam=0.0),
                coarse_grid,
                substream(8, i, 1),
            ).mid[-1]
            - params.m0
            for i in range(n)
        ])
        assert ends.std(ddof=1) == pytest.approx(50.0, rel=0.03)

    def test_mid_noise_independent_of_rate(self, params, coarse_grid):
        # sample correlation of rate and mid-noise increments is 0 up to MC error
        n = 2000
        rate_inc, mid_inc = [], []
        for i in range(n):
            z_rate = substream(9, i, 0).standard_normal(coarse_grid.n_steps + 1)
            z_mid = substream(9, i, 1).standard_normal(coarse_grid.n_steps)
            rate_inc.append(z_rate[1:])
            mid_inc.append(z_mid)
        r = np.corrcoef(np.concatenate(rate_inc), np.concatenate(mid_inc))[0, 1]
        n_samples = n * coarse_grid.n_steps
        assert abs(r) < 3.0 / math.sqrt(n_samples)


def _twap_path(params, grid):
    from impactlab.model import RatePath

    q = np.full(grid.n_steps + 1, params.twap_rate)
    return RatePath(q=q, q_cum=cumulative_trapezoid(q, grid.dt))
