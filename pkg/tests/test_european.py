"""Tests for the closed-form European put under two-state switching.

The semi-analytic price is an inverse-transform integral whose integrand
is built from the occupation-time density of the chain. The tests
cross-check it against the Black-Scholes limit, against Monte Carlo with
exact terminal sampling, and against its own structural limits (tiny
spot, strong mixing, expiry).
"""

import numpy as np
import pytest

from rsasian import (
    AsianOptionSpec,
    DegenerateVolatilities,
    MarketState,
    McConfig,
    QuadratureSpec,
    black_scholes_put,
    discounted_strike_vector,
    european_put_grid,
    mc_price,
    price_european_put_rs,
    two_state_model,
)

S0, K, T = 100.0, 100.0, 1.0


def _mc_european(model, s, k, regime, n_paths=200_000, seed=11):
    # a single time step samples the terminal value exactly: the GBM
    # increment between switch times is drawn in closed form, so only the
    # chain path (handled event by event) matters
    spec = AsianOptionSpec(style="european_put", T=T, K=k)
    state = MarketState(t=0.0, s=s, a=0.0, regime=regime)
    cfg = McConfig(n_paths=n_paths, n_steps=1, seed=seed, antithetic=True)
    return mc_price(spec, state, model, cfg)


class TestBlackScholesLimits:
    def test_zero_switching_recovers_bs_in_each_regime(self):
        model = two_state_model(0.05, 0.02, 0.3, 0.2, 0.0, 0.0)
        for regime, (r, sigma) in enumerate(zip(model.r, model.sigma)):
            got = price_european_put_rs(model, S0, K, 0.0, T, regime).price
            want = black_scholes_put(S0, K, r, sigma, T)
            assert np.isclose(got, want, atol=5e-7), (
                f"regime {regime}: {got} vs BS {want}"
            )

    def test_identical_regimes_fall_back_to_bs(self, flat_model):
        res = price_european_put_rs(flat_model, S0, K, 0.0, T, 0)
        want = black_scholes_put(S0, K, 0.05, 0.3, T)
        assert res.price == pytest.approx(want)
        assert res.diagnostics.get("degenerate_fallback") == "black_scholes"

    def test_equal_variances_distinct_rates_refused(self):
        model = two_state_model(0.05, 0.03, 0.3, 0.3, 1.0, 1.0)
        with pytest.raises(DegenerateVolatilities):
            price_european_put_rs(model, S0, K, 0.0, T, 0)


class TestAgainstMonteCarlo:
    @pytest.mark.parametrize("regime", [0, 1])
    @pytest.mark.parametrize("s", [90.0, 100.0, 110.0])
    def test_exact_variant_matches_mc(self, desk_model, regime, s):
        est = _mc_european(desk_model, s, K, regime)
        exact = price_european_put_rs(desk_model, s, K, 0.0, T, regime).price
        z = (est.price - exact) / est.std_error
        assert abs(z) < 4.0, f"s={s} regime={regime}: z = {z:.2f}"

    def test_printed_damping_variant_is_rejected_by_mc(self, desk_model):
        # the damping factor admits a second spelling in which the decay
        # rate is not rescaled by the variance gap; MC rules it out
        est = _mc_european(desk_model, S0, K, 0, n_paths=400_000, seed=13)
        exact = price_european_put_rs(desk_model, S0, K, 0.0, T, 0).price
        other = price_european_put_rs(
            desk_model, S0, K, 0.0, T, 0, variant="rho_printed"
        ).price
        z_exact = abs(est.price - exact) / est.std_error
        z_other = abs(est.price - other) / est.std_error
        assert z_exact < 4.0, f"exact variant off: z = {z_exact:.2f}"
        assert z_other > 10.0, f"expected the variant to be far off: z = {z_other:.2f}"


class TestStructuralLimits:
    def test_tiny_spot_approaches_discounted_strike(self, desk_model):
        want = discounted_strike_vector(desk_model, K, T)
        for regime in (0, 1):
            got = price_european_put_rs(desk_model, 1e-6, K, 0.0, T, regime).price
            assert np.isclose(got, want[regime], rtol=1e-6), (
                f"regime {regime}: {got} vs {want[regime]}"
            )

    def test_expiry_returns_payoff(self, flat_model):
        assert price_european_put_rs(flat_model, 90.0, K, T, T, 0).price == 10.0
        assert price_european_put_rs(flat_model, 120.0, K, T, T, 0).price == 0.0

    def test_strong_mixing_erases_the_starting_regime(self):
        gaps = []
        for a in (1.0, 10.0, 100.0):
            model = two_state_model(0.05, 0.03, 0.3, 0.2, a, a)
            p0 = price_european_put_rs(model, S0, K, 0.0, T, 0).price
            p1 = price_european_put_rs(model, S0, K, 0.0, T, 1).price
            gaps.append(abs(p0 - p1))
        assert gaps[0] > gaps[1] > gaps[2], f"gaps not shrinking: {gaps}"

    def test_put_price_bounds(self, desk_model):
        price = price_european_put_rs(desk_model, S0, K, 0.0, T, 0).price
        lo = black_scholes_put(S0, K, 0.05, 0.2, T)
        hi = black_scholes_put(S0, K, 0.03, 0.3, T)
        assert lo < price < hi, f"{lo} < {price} < {hi}"


class TestQuadrature:
    def test_price_stable_under_refinement(self, desk_model):
        base = price_european_put_rs(desk_model, S0, K, 0.0, T, 0).price
        fine = price_european_put_rs(
            desk_model,
            S0,
            K,
            0.0,
            T,
            0,
            quad=QuadratureSpec(rho_max=100.0, n_rho=4000),
        ).price
        assert np.isclose(base, fine, rtol=1e-8), f"{base} vs {fine}"

    def test_adaptive_rule_agrees_with_panels(self, desk_model):
        base = price_european_put_rs(desk_model, S0, K, 0.0, T, 0).price
        adaptive = price_european_put_rs(
            desk_model, S0, K, 0.0, T, 0, quad=QuadratureSpec(rule="adaptive")
        ).price
        assert np.isclose(base, adaptive, rtol=1e-7), f"{base} vs {adaptive}"

    def test_grid_evaluation_matches_scalar_calls(self, desk_model):
        s_values = np.array([80.0, 100.0, 125.0])
        grid = european_put_grid(desk_model, s_values, K, T)
        assert grid.shape == (2, 3)
        for regime in (0, 1):
            for j, s in enumerate(s_values):
                want = price_european_put_rs(desk_model, s, K, 0.0, T, regime).price
                assert np.isclose(grid[regime, j], want, rtol=1e-9), (
                    f"grid[{regime},{j}] = {grid[regime, j]} vs {want}"
                )
