"""Fiber grids, spectra, and projections against analytic references."""

import math

import numpy as np
import pytest

import tubelab as tl
from tubelab import fiber as fiber_mod

# first positive zero of J0, Abramowitz & Stegun table 9.5
J0_ZERO = 2.404825557695773


def interval_lambda0(n):
    grid = fiber_mod.IntervalFiberGrid(n)
    return fiber_mod.fiber_spectrum(grid, n_modes=2).lambda0


class TestIntervalGrid:
    def test_total_weight_exact(self):
        g = fiber_mod.IntervalFiberGrid(31)
        assert np.sum(g.weights) == pytest.approx(2.0, abs=1e-14)

    def test_center_node_for_odd_count(self):
        g = fiber_mod.IntervalFiberGrid(31)
        assert np.min(np.abs(g.s)) < 1e-14

    def test_lambda0_accuracy(self):
        exact = (math.pi / 2) ** 2
        assert abs(interval_lambda0(255) - exact) < 1e-4

    def test_richardson_order(self):
        lams = [interval_lambda0(n) for n in (63, 127, 255)]
        order = math.log2((lams[0] - lams[1]) / (lams[1] - lams[2]))
        assert 1.8 <= order <= 2.2

    def test_higher_modes(self):
        g = fiber_mod.IntervalFiberGrid(127)
        sp = fiber_mod.fiber_spectrum(g, n_modes=4)
        for k in range(4):
            assert sp.eigenvalues[k] == pytest.approx(
                sp.analytic_eigenvalue(k), rel=1e-3
            )

    def test_weighted_coefficient_form(self):
        # constant coefficient 2 doubles the form
        g = fiber_mod.IntervalFiberGrid(31)
        f = np.sin(math.pi * g.s)
        q1 = float(f @ (g.dirichlet_form() @ f))
        q2 = float(f @ (g.dirichlet_form(lambda m: 2.0 * np.ones_like(m)) @ f))
        assert q2 == pytest.approx(2.0 * q1, rel=1e-12)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            fiber_mod.IntervalFiberGrid(4)


class TestPolarGrid:
    def test_total_weight_exact(self):
        g = fiber_mod.PolarFiberGrid(24)
        assert np.sum(g.weights) == pytest.approx(math.pi, abs=1e-13)

    def test_lambda0_vs_bessel(self):
        g = fiber_mod.PolarFiberGrid(127)
        sp = fiber_mod.fiber_spectrum(g, n_modes=2)
        assert abs(sp.lambda0 - J0_ZERO**2) < 1e-3

    def test_first_excited_is_doublet(self):
        g = fiber_mod.PolarFiberGrid(32)
        sp = fiber_mod.fiber_spectrum(g, n_modes=4)
        assert len(sp.multiplets[0]) == 1
        assert len(sp.multiplets[1]) == 2

    def test_ground_state_radial(self):
        g = fiber_mod.PolarFiberGrid(24)
        sp = fiber_mod.fiber_spectrum(g, n_modes=2)
        prof = sp.ground_state.reshape(g.n_r, g.n_theta)
        assert np.max(np.abs(prof - prof[:, :1])) == 0.0
        assert np.all(sp.ground_state >= 0)

    def test_rotation_generator_on_coordinates(self):
        for nt, tol in ((16, 0.03), (32, 0.008)):
            g = fiber_mod.PolarFiberGrid(24, nt)
            Z = g.rotation_generator()
            w = g.node_w()
            # the rotation derivation sends w1 to w2 (up to O(dtheta^2))
            assert np.max(np.abs(Z @ w[:, 0] - w[:, 1])) < tol
            # radial fields are annihilated exactly
            r, _ = g.node_rt()
            assert np.max(np.abs(Z @ (r**2))) == 0.0

    def test_rotation_fields_shape(self):
        assert fiber_mod.rotation_fields(fiber_mod.IntervalFiberGrid(16)) == []
        zs = fiber_mod.rotation_fields(fiber_mod.PolarFiberGrid(16))
        assert len(zs) == 1


class TestSpectrumAndProjections:
    def test_ground_state_normalized(self, circle_spectrum, circle_grid):
        g = circle_grid.fiber
        phi0 = circle_spectrum.ground_state
        assert np.sum(g.weights * phi0**2) == pytest.approx(1.0, abs=1e-12)

    def test_projection_idempotent_selfadjoint(self, circle_grid, circle_spectrum, rng):
        g = circle_grid
        f = rng.standard_normal(g.n)
        h = rng.standard_normal(g.n)
        pf = fiber_mod.project_E0(g, circle_spectrum, f)
        ppf = fiber_mod.project_E0(g, circle_spectrum, pf)
        assert np.max(np.abs(ppf - pf)) < 1e-12 * np.max(np.abs(pf))
        ph = fiber_mod.project_E0(g, circle_spectrum, h)
        assert g.inner(pf, h) == pytest.approx(g.inner(f, ph), rel=1e-10)

    def test_extract_fb_of_ground_product(self, circle_grid, circle_spectrum):
        gb = 1.0 + 0.3 * np.cos(circle_grid.base_x)
        f = np.outer(gb, circle_spectrum.ground_state).ravel()
        fb = fiber_mod.extract_fb(circle_grid, circle_spectrum, f)
        assert np.max(np.abs(fb - gb)) < 1e-12

    def test_multiplet_projection_idempotent(self, circle_grid, circle_spectrum, rng):
        proj = fiber_mod.multiplet_projection(circle_spectrum, 1)
        f = rng.standard_normal(circle_grid.n)
        pf = proj.apply(f, circle_grid.n_base)
        ppf = proj.apply(pf, circle_grid.n_base)
        assert np.max(np.abs(ppf - pf)) < 1e-12 * (1.0 + np.max(np.abs(pf)))

    def test_mode_capacity_guard(self):
        g = fiber_mod.IntervalFiberGrid(16)
        with pytest.raises(tl.ResolutionError):
            fiber_mod.fiber_spectrum(g, n_modes=12)


def test_bessel_oracle():
    z = fiber_mod.bessel_j0_first_zero()
    assert abs(z - J0_ZERO) < 1e-9
    assert abs(fiber_mod.bessel_j0(z)) < 1e-9
    assert fiber_mod.bessel_j0(0.0) == 1.0
