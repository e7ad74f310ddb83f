"""Tests for the half-line heat kernel with a drifted reflection term.

The kernel carries an exponent that couples the drift parameter gamma to
the reflection image. Two spellings of that exponent are implemented; the
``tau_scaled`` one is the spelling that actually solves the PDE, and the
variant selector must pick it by measuring residuals.
"""

import numpy as np
import pytest

from rsasian import (
    delta_property_error,
    greens_function,
    heat_residual,
    select_exponent_variant,
)

SAMPLES = [
    (0.05, 0.3, 0.5, 1.1111111111111112),
    (0.2, 1.0, 0.4, 1.1111111111111112),
    (0.5, 0.8, 1.2, 0.5),
    (0.1, 1.5, 0.7, 2.5),
    (0.8, 0.25, 0.9, 1.0),
]


class TestHeatResidual:
    @pytest.mark.parametrize("tau,z,xi,gamma", SAMPLES)
    def test_tau_scaled_variant_solves_the_pde(self, tau, z, xi, gamma):
        res = heat_residual(tau, z, xi, gamma, variant="tau_scaled")
        assert res < 1e-6, f"residual {res:.3e} at tau={tau} z={z} xi={xi} gamma={gamma}"

    @pytest.mark.parametrize("tau,z,xi", [(0.5, 0.3, 0.5), (1.0, 1.0, 0.4)])
    def test_alternative_exponent_fails_the_pde(self, tau, z, xi):
        # The other spelling omits a factor of tau in the image exponent, so
        # its defect grows with gamma and the elapsed diffusion time.
        bad = heat_residual(tau, z, xi, 2.5, variant="paper_printed")
        good = heat_residual(tau, z, xi, 2.5, variant="tau_scaled")
        assert bad > 1e-2, f"expected a gross residual, got {bad:.3e}"
        assert good < 1e-6, f"reference variant drifted: {good:.3e}"

    def test_kernel_positive_and_finite(self):
        tau = 0.2
        z = np.linspace(0.05, 4.0, 40)
        vals = np.array([greens_function(tau, zz, 0.6, 1.2) for zz in z])
        assert np.isfinite(vals).all()
        assert (vals >= 0.0).all()


class TestDeltaProperty:
    @staticmethod
    def _bump(x):
        return np.exp(-((x - 1.0) ** 2))

    @staticmethod
    def _rational(x):
        return 1.0 / (1.0 + x**2)

    @pytest.mark.parametrize("phi", [_bump.__func__, _rational.__func__])
    def test_small_time_limit_recovers_phi(self, phi):
        err = delta_property_error(1e-3, 0.8, phi, 1.2)
        assert err < 5e-3, f"delta property error {err:.3e}"

    @pytest.mark.parametrize("phi", [_bump.__func__, _rational.__func__])
    def test_error_shrinks_linearly_in_tau(self, phi):
        e_coarse = delta_property_error(0.04, 0.8, phi, 1.2)
        e_fine = delta_property_error(0.01, 0.8, phi, 1.2)
        # first order in tau: quartering tau should cut the error by
        # roughly four; accept anything better than half to stay robust
        assert e_fine < 0.5 * e_coarse, f"{e_fine:.3e} !< 0.5 * {e_coarse:.3e}"


class TestVariantSelection:
    def test_selector_picks_tau_scaled(self):
        assert select_exponent_variant() == "tau_scaled"

    def test_unknown_variant_rejected(self):
        with pytest.raises(Exception):
            greens_function(0.1, 0.5, 0.5, 1.0, variant="no_such_variant")
