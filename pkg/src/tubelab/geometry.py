"""Fermi-coordinate geometry of unit-radius tubes around a closed submanifold.

A point of the rescaled tube is a base coordinate together with a normal
vector W of length at most one; the physical displacement is eps * W.
All metric data is expressed in the block basis (tangent frame, parallel
normal frame) at the base point, after the fiber rescaling that maps the
shrinking tube onto the fixed unit tube.  Conventions:

* the Laplacian is the geometer's nonnegative one, Delta = -d*d, so the
  flat radial potential of an annulus is U = -1/(4 r^2);
* base coordinates are arc length, so the base cometric block is the
  identity on the submanifold itself;
* the normal frame along a curve is parallel (rotation minimizing), which
  kills connection terms in the metric blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FocalRadiusExceeded

_DEGENERACY_TOL = 1e-12


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleInPlane:
    """Circle of the given radius in the flat plane (codimension 1)."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim_base(self):
        return 1

    @property
    def codim(self):
        return 1

    @property
    def base_length(self):
        return 2.0 * math.pi * self.radius


class CurveInSpace:
    """Closed arc-length curve in flat 3-space (codimension 2).

    kappa and tau are callables of arc length.  The parallel normal frame
    is obtained by rotating the Frenet normal through the integral of the
    torsion; the curvature vector in that frame is
    k(s) = kappa(s) * (cos phi(s), sin phi(s)) with phi' = tau.
    """

    def __init__(self, kappa, tau, length, n_samples=4096):
        if length <= 0:
            raise ValueError("length must be positive")
        self.kappa = kappa
        self.tau = tau
        self.length = float(length)
        s = np.linspace(0.0, self.length, n_samples + 1)
        tau_vals = np.array([float(tau(si)) for si in s])
        # cumulative trapezoid for the frame angle phi(s)
        phi = np.concatenate(
            [[0.0], np.cumsum(0.5 * (tau_vals[1:] + tau_vals[:-1]) * np.diff(s))]
        )
        self._s_samples = s
        self._phi_samples = phi
        self.total_torsion = float(phi[-1])

    @property
    def dim_base(self):
        return 1

    @property
    def codim(self):
        return 2

    @property
    def base_length(self):
        return self.length

    def frame_angle(self, s):
        s = np.mod(s, self.length)
        return np.interp(s, self._s_samples, self._phi_samples)

    def curvature_vector(self, s):
        """Normal-frame components of the curvature vector at arc length s."""
        phi = self.frame_angle(s)
        kap = float(self.kappa(np.mod(s, self.length)))
        return np.array([kap * math.cos(phi), kap * math.sin(phi)])


def constant_curve(kappa0, tau0, length):
    return CurveInSpace(lambda s: kappa0, lambda s: tau0, length)


def sampled_curve(s_nodes, kappa_vals, tau_vals):
    """Curve from sampled curvature/torsion; values interpolate periodically."""
    s_nodes = np.asarray(s_nodes, dtype=float)
    length = float(s_nodes[-1])
    kap = np.asarray(kappa_vals, dtype=float)
    tau = np.asarray(tau_vals, dtype=float)
    return CurveInSpace(
        lambda s: np.interp(np.mod(s, length), s_nodes, kap),
        lambda s: np.interp(np.mod(s, length), s_nodes, tau),
        length,
    )


def ellipse_curve(a, b, n_samples=4096):
    """Planar ellipse with semi-axes a, b, re-parametrized by arc length."""
    u = np.linspace(0.0, 2.0 * math.pi, n_samples + 1)
    speed = np.sqrt((a * np.sin(u)) ** 2 + (b * np.cos(u)) ** 2)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(u))])
    length = float(s[-1])
    kappa_u = a * b / ((a * np.sin(u)) ** 2 + (b * np.cos(u)) ** 2) ** 1.5

    def kappa(sv):
        return np.interp(np.mod(sv, length), s, kappa_u)

    return CurveInSpace(kappa, lambda sv: 0.0, length)


class SyntheticFiberModel:
    """Fiber-only model (a point base) with prescribed constant ambient
    curvature components c[mu, alpha, nu, beta] = <R(e_mu, e_alpha) e_nu, e_beta>.

    Exists to exercise the curvature coupling in isolation; the metric is the
    exact inversion of the second-order truncated Jacobi endomorphism.
    """

    def __init__(self, codim=2, curvature=0.0):
        if codim < 2:
            raise ValueError("synthetic fiber model needs codimension >= 2")
        self.codim_value = int(codim)
        q = self.codim_value
        c = np.asarray(curvature, dtype=float)
        if c.ndim == 0:
            if q != 2:
                raise ValueError("scalar curvature shorthand only for codim 2")
            comp = np.zeros((2, 2, 2, 2))
            val = float(c)
            # single independent component <R(e2,e1)e2,e1> = val
            comp[1, 0, 1, 0] = val
            comp[0, 1, 0, 1] = val
            comp[1, 0, 0, 1] = -val
            comp[0, 1, 1, 0] = -val
            c = comp
        if c.shape != (q, q, q, q):
            raise ValueError("curvature tensor has wrong shape")
        if not (
            np.allclose(c, -np.transpose(c, (1, 0, 2, 3)))
            and np.allclose(c, -np.transpose(c, (0, 1, 3, 2)))
            and np.allclose(c, np.transpose(c, (2, 3, 0, 1)))
        ):
            raise ValueError("curvature components violate the symmetries")
        self.curvature = c

    @property
    def dim_base(self):
        return 0

    @property
    def codim(self):
        return self.codim_value

    @property
    def base_length(self):
        return 0.0

    @property
    def pair_component(self):
        """The single independent component for codim 2."""
        if self.codim_value != 2:
            raise NotImplementedError("only defined for codimension 2")
        return float(self.curvature[1, 0, 1, 0])

    def curvature_operator(self, w):
        """Matrix of V -> R(W, V) W in the normal frame."""
        w = np.asarray(w, dtype=float)
        # M[beta, alpha] = w_mu w_nu c[mu, alpha, nu, beta]
        return np.einsum("m,n,manb->ba", w, w, self.curvature)


# ---------------------------------------------------------------------------
# points and metric containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TubePoint:
    """A point of the rescaled unit tube.

    base: arc-length coordinate on the submanifold (ignored for fiber-only
    models).  w: normal-frame components, |w| <= 1.  epsilon: tube radius.
    """

    base: float
    w: np.ndarray
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float)))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if np.linalg.norm(self.w) > 1.0 + 1e-9:
            raise ValueError("fiber coordinate outside the unit ball")


@dataclass(frozen=True)
class CometricAt:
    """Cometric blocks at a tube point in the (tangent, normal) frame,
    after the fiber rescaling of covectors."""

    horizontal: np.ndarray
    vertical: np.ndarray
    cross: np.ndarray

    def full(self):
        l = self.horizontal.shape[0]
        q = self.vertical.shape[0]
        g = np.zeros((l + q, l + q))
        g[:l, :l] = self.horizontal
        g[l:, l:] = self.vertical
        g[:l, l:] = self.cross
        g[l:, :l] = self.cross.T
        return g


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def weingarten(model, base, w):
    """Shape operator A_W on the tangent space, W = sum_i w_i n_i.

    Sign convention is frozen against the annulus: for the circle of radius R
    and W the outward unit normal, A_W = [-1/R] (the tube's horizontal metric
    coefficient grows outward as 1 + eps*s/R)."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if isinstance(model, CircleInPlane):
        return np.array([[-w[0] / model.radius]])
    if isinstance(model, CurveInSpace):
        k = model.curvature_vector(base)
        return np.array([[float(k @ w)]])
    if isinstance(model, SyntheticFiberModel):
        return np.zeros((0, 0))
    raise NotImplementedError(f"unsupported model kind: {type(model).__name__}")


def jacobi_endomorphism(model, base, w, eps):
    """Block matrix of the tube-metric endomorphism at displacement eps*W.

    Flat models give the exact closed form; the synthetic model gives the
    second-order truncation with the cubic remainder set to zero.  Raises
    FocalRadiusExceeded when the endomorphism degenerates."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if isinstance(model, (CircleInPlane, CurveInSpace)):
        q = model.codim
        A = np.eye(1 + q)
        a_w = weingarten(model, base, w)[0, 0]
        A[0, 0] = 1.0 - eps * a_w
        if A[0, 0] <= _DEGENERACY_TOL:
            raise FocalRadiusExceeded(
                f"horizontal block {A[0, 0]:.3e} degenerate at eps={eps}"
            )
        return A
    if isinstance(model, SyntheticFiberModel):
        q = model.codim
        A = np.eye(q) + (eps**2 / 6.0) * model.curvature_operator(w)
        if np.min(np.linalg.eigvalsh(0.5 * (A + A.T))) <= _DEGENERACY_TOL:
            raise FocalRadiusExceeded("truncated endomorphism degenerate")
        return A
    raise NotImplementedError(f"unsupported model kind: {type(model).__name__}")


def cometric(model, point, which="induced"):
    """Cometric blocks at a tube point, fiber-rescaled.

    which = "sasaki": identity horizontal block, eps^-2 identity vertical.
    which = "induced": exact inversion of A^T A with the covector rescaling
    (eta_tan, eps^-1 eta_norm)."""
    eps = point.epsilon
    l = model.dim_base
    q = model.codim
    if which == "sasaki":
        return CometricAt(np.eye(l), np.eye(q) / eps**2, np.zeros((l, q)))
    if which != "induced":
        raise ValueError("which must be 'sasaki' or 'induced'")
    A = jacobi_endomorphism(model, point.base, point.w, eps)
    G = A.T @ A
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise FocalRadiusExceeded("tube metric singular") from exc
    scale = np.concatenate([np.ones(l), np.full(q, 1.0 / eps)])
    full = Ginv * np.outer(scale, scale)
    return CometricAt(full[:l, :l].copy(), full[l:, l:].copy(), full[:l, l:].copy())


def density_rho(model, point):
    """Radon-Nikodym density of the induced volume against the reference
    product volume; equals 1 on the submanifold itself."""
    A = jacobi_endomorphism(model, point.base, point.w, point.epsilon)
    rho = float(np.linalg.det(A))
    if rho <= 0:
        raise FocalRadiusExceeded("volume density not positive")
    return rho


def _rho_unrescaled(model, base, v):
    """Density at physical normal displacement v (no fiber rescaling)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if isinstance(model, CircleInPlane):
        return 1.0 + v[0] / model.radius
    if isinstance(model, CurveInSpace):
        return 1.0 - float(model.curvature_vector(base) @ v)
    if isinstance(model, SyntheticFiberModel):
        raise NotImplementedError("no ambient chart for the synthetic model")
    raise NotImplementedError(f"unsupported model kind: {type(model).__name__}")


def potential_U(model, point):
    """Ground-state-transform potential U = rho^(1/2) Delta rho^(-1/2).

    Circle: closed form -1/(4 r^2) at physical radius r.  Curve: centered
    finite differences of the flat ambient Laplacian.  Synthetic model:
    defined (as zero) only in the curvature-free case, where rho == 1."""
    if isinstance(model, CircleInPlane):
        r = model.radius + point.epsilon * point.w[0]
        if r <= 0:
            raise FocalRadiusExceeded("point past the focal radius")
        return -1.0 / (4.0 * r * r)
    if isinstance(model, CurveInSpace):
        return potential_U_fd(model, point)
    if isinstance(model, SyntheticFiberModel):
        if np.any(model.curvature != 0.0):
            raise NotImplementedError(
                "no ambient Laplacian is defined for a curved synthetic fiber model"
            )
        return 0.0
    raise NotImplementedError(f"unsupported model kind: {type(model).__name__}")


def potential_U_fd(model, point, h=1e-4):
    """Finite-difference evaluation of U for flat-ambient curve-like models.

    In unrescaled Fermi coordinates (x, v) the ambient metric is
    diag(rho^2, id), so for f = rho^(-1/2),

        Delta_usual f = rho^-1 [ d_x(rho^-1 d_x f) + sum_i d_vi(rho d_vi f) ]

    and U = -rho^(1/2) Delta_usual f.  Each flux divergence is a standard
    variable-coefficient centered stencil with step h."""
    base = point.base
    v0 = point.epsilon * point.w
    q = len(v0)

    def rho(x, v):
        return _rho_unrescaled(model, x, v)

    def f(x, v):
        return rho(x, v) ** -0.5

    lap = 0.0
    # d_x (rho^-1 d_x f)
    a_p = 1.0 / rho(base + 0.5 * h, v0)
    a_m = 1.0 / rho(base - 0.5 * h, v0)
    lap += (
        a_p * (f(base + h, v0) - f(base, v0)) - a_m * (f(base, v0) - f(base - h, v0))
    ) / h**2
    # sum_i d_vi (rho d_vi f)
    for i in range(q):
        e = np.zeros(q)
        e[i] = 1.0
        b_p = rho(base, v0 + 0.5 * h * e)
        b_m = rho(base, v0 - 0.5 * h * e)
        lap += (
            b_p * (f(base, v0 + h * e) - f(base, v0))
            - b_m * (f(base, v0) - f(base, v0 - h * e))
        ) / h**2
    return -(rho(base, v0) ** 0.5) * lap / rho(base, v0)
