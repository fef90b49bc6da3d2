"""Metric data checked against closed forms and an independent embedding oracle."""

import math

import numpy as np
import pytest

import tubelab as tl
from tubelab import geometry


def embedding_cometric_circle(R, eps, s, h=1e-6):
    """Cometric blocks computed straight from the ambient embedding.

    The tube chart is (x, s) -> (R + eps*s) * (cos(x/R), sin(x/R)); s is the
    rescaled fiber coordinate, so the cometric is simply the inverse of the
    numerical J^T J.  Shares no code with the library path."""

    def emb(x, sv):
        r = R + eps * sv
        return np.array([r * math.cos(x / R), r * math.sin(x / R)])

    jx = (emb(h, s) - emb(-h, s)) / (2 * h)
    js = (emb(0.0, s + h) - emb(0.0, s - h)) / (2 * h)
    J = np.stack([jx, js], axis=1)
    return np.linalg.inv(J.T @ J)


class TestCircle:
    def test_horizontal_closed_form(self):
        m = tl.CircleInPlane(1.0)
        p = tl.TubePoint(0.3, [0.5], 0.1)
        cm = tl.cometric(m, p)
        assert cm.horizontal[0, 0] == pytest.approx(1.05**-2, abs=1e-14)
        assert cm.vertical[0, 0] == pytest.approx(100.0, abs=1e-10)
        assert cm.cross[0, 0] == 0.0

    def test_matches_embedding_oracle(self):
        m = tl.CircleInPlane(1.3)
        for eps in (0.3, 0.1):
            for s in (-0.9, -0.2, 0.0, 0.5, 1.0):
                cm = tl.cometric(m, tl.TubePoint(0.7, [s], eps)).full()
                ref = embedding_cometric_circle(1.3, eps, s)
                assert np.max(np.abs(cm - ref)) < 1e-6 * np.max(np.abs(ref))

    def test_sasaki_blocks(self):
        m = tl.CircleInPlane(1.0)
        cm = tl.cometric(m, tl.TubePoint(0.0, [0.4], 0.2), which="sasaki")
        assert cm.horizontal[0, 0] == 1.0
        assert cm.vertical[0, 0] == pytest.approx(25.0, abs=1e-12)

    def test_density_closed_form(self):
        m = tl.CircleInPlane(2.0)
        # det of the 2x2 endomorphism is the horizontal stretch 1 + eps*s/R
        assert tl.density_rho(m, tl.TubePoint(0.0, [0.6], 0.1)) == pytest.approx(
            1.03, abs=1e-14
        )
        assert tl.density_rho(m, tl.TubePoint(1.0, [0.0], 0.1)) == 1.0

    def test_weingarten_sign(self):
        # outward normal bends the tangent circle away: A_W = -s/R
        m = tl.CircleInPlane(2.0)
        assert tl.weingarten(m, 0.0, [1.0])[0, 0] == pytest.approx(-0.5)

    def test_potential_closed_form(self):
        m = tl.CircleInPlane(1.0)
        assert tl.potential_U(m, tl.TubePoint(0.0, [0.0], 0.1)) == pytest.approx(-0.25)
        p = tl.TubePoint(0.0, [0.5], 0.2)
        assert tl.potential_U(m, p) == pytest.approx(-1.0 / (4 * 1.1**2), abs=1e-14)

    def test_potential_fd_agrees(self):
        m = tl.CircleInPlane(1.0)
        p = tl.TubePoint(0.4, [0.3], 0.2)
        assert tl.potential_U_fd(m, p) == pytest.approx(tl.potential_U(m, p), abs=1e-6)


class TestCurve:
    def test_reduces_to_circle(self):
        # planar unit-curvature closed curve of length 2*pi is the unit circle;
        # its inward-pointing first frame vector flips the sign of s
        R = 1.0
        curve = tl.constant_curve(1.0 / R, 0.0, 2 * math.pi * R)
        circ = tl.CircleInPlane(R)
        for s in (-0.7, 0.2, 0.8):
            pc = tl.TubePoint(0.5, [-s, 0.0], 0.1)
            ps = tl.TubePoint(0.5, [s], 0.1)
            assert tl.density_rho(curve, pc) == pytest.approx(
                tl.density_rho(circ, ps), abs=1e-12
            )
            hc = tl.cometric(curve, pc).horizontal[0, 0]
            hs = tl.cometric(circ, ps).horizontal[0, 0]
            assert hc == pytest.approx(hs, abs=1e-12)

    def test_vertical_block_flat(self):
        curve = tl.constant_curve(0.8, 0.0, 5.0)
        cm = tl.cometric(curve, tl.TubePoint(1.0, [0.3, 0.4], 0.1))
        assert np.allclose(cm.vertical, 100.0 * np.eye(2), atol=1e-10)

    def test_potential_hand_derived(self):
        # rho = 1 - k.v linear in v gives U = -|k|^2 / (4 rho^2) by hand
        kappa = 0.7
        curve = tl.constant_curve(kappa, 0.0, 10.0)
        p = tl.TubePoint(2.0, [0.3, 0.2], 0.1)
        rho = 1.0 - kappa * 0.1 * 0.3
        expect = -(kappa**2) / (4.0 * rho**2)
        assert tl.potential_U(curve, p) == pytest.approx(expect, abs=1e-6)

    def test_torsion_rotates_curvature_vector(self):
        curve = tl.constant_curve(1.0, 0.5, 4 * math.pi)
        assert curve.total_torsion == pytest.approx(2 * math.pi, rel=1e-8)
        k = curve.curvature_vector(math.pi)
        phi = 0.5 * math.pi
        assert k == pytest.approx([math.cos(phi), math.sin(phi)], abs=1e-8)

    def test_sampled_curve_interpolates(self):
        s = np.linspace(0.0, 6.0, 25)
        curve = tl.sampled_curve(s, 1.0 + 0.2 * np.sin(s), np.zeros_like(s))
        assert curve.kappa(s[3]) == pytest.approx(1.0 + 0.2 * math.sin(s[3]))
        assert curve.total_torsion == 0.0

    def test_ellipse_curvature_range(self):
        curve = tl.ellipse_curve(2.0, 1.0)
        ks = [curve.kappa(s) for s in np.linspace(0, curve.length, 200)]
        # extremes a/b^2 and b/a^2
        assert min(ks) == pytest.approx(0.25, rel=1e-3)
        assert max(ks) == pytest.approx(2.0, rel=1e-3)

    def test_focal_radius_exceeded(self):
        curve = tl.constant_curve(3.0, 0.0, 10.0)
        with pytest.raises(tl.FocalRadiusExceeded):
            tl.jacobi_endomorphism(curve, 0.0, [1.0, 0.0], 0.5)


class TestSynthetic:
    def test_curvature_operator(self):
        m = tl.SyntheticFiberModel(2, 2.0)
        # R(W, W) W vanishes, and for W = e1 the operator is diag(0, c)
        assert np.allclose(m.curvature_operator([1.0, 0.0]) @ [1.0, 0.0], 0.0)
        assert np.allclose(m.curvature_operator([1.0, 0.0]), np.diag([0.0, 2.0]))
        assert np.allclose(m.curvature_operator([0.0, 1.0]), np.diag([2.0, 0.0]))

    def test_symmetry_validation(self):
        bad = np.zeros((2, 2, 2, 2))
        bad[0, 0, 0, 0] = 1.0  # violates antisymmetry in the first pair
        with pytest.raises(ValueError):
            tl.SyntheticFiberModel(2, bad)

    def test_vertical_cometric_expansion(self):
        # induced - sasaki -> -(1/3) R_W blockwise, with O(eps^2) remainder
        c = 1.5
        m = tl.SyntheticFiberModel(2, c)
        w = np.array([0.8, 0.0])
        errs = []
        for eps in (0.2, 0.1):
            p = tl.TubePoint(0.0, w, eps)
            diff = (
                tl.cometric(m, p).vertical
                - tl.cometric(m, p, which="sasaki").vertical
            )
            errs.append(np.max(np.abs(diff + m.curvature_operator(w) / 3.0)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)

    def test_flat_case_potential_zero(self):
        m = tl.SyntheticFiberModel(2, 0.0)
        assert tl.potential_U(m, tl.TubePoint(0.0, [0.3, 0.1], 0.1)) == 0.0

    def test_curved_potential_undefined(self):
        m = tl.SyntheticFiberModel(2, 1.0)
        with pytest.raises(NotImplementedError):
            tl.potential_U(m, tl.TubePoint(0.0, [0.3, 0.1], 0.1))


def test_jacobi_identity_on_submanifold():
    for model, w in (
        (tl.CircleInPlane(1.0), [0.0]),
        (tl.constant_curve(1.0, 0.0, 5.0), [0.0, 0.0]),
        (tl.SyntheticFiberModel(2, 1.0), [0.0, 0.0]),
    ):
        A = tl.jacobi_endomorphism(model, 0.0, w, 0.1)
        assert np.allclose(A, np.eye(A.shape[0]), atol=1e-14)


def test_tube_point_validation():
    with pytest.raises(ValueError):
        tl.TubePoint(0.0, [1.5], 0.1)
    with pytest.raises(ValueError):
        tl.TubePoint(0.0, [0.5], -0.1)
