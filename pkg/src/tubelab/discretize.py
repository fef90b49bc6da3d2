"""Tensor-product grids on the unit tube and weighted operator assembly.

The grid is base x fiber with the reference product measure as quadrature
weight; all quadratic forms are assembled by quadrature of cometric
contractions of one-sided differences, so every operator is symmetric and
(semi)definite in the weighted inner product by construction, not by
post-hoc symmetrization.  Fields are flat arrays of length
n_base * n_fiber, base-major.

Form names:
  V           flat fiber Dirichlet energy (no epsilon)
  H           horizontal energy with unit coefficient (no epsilon)
  SasakiEps   eps^-2 V + H, exact at the matrix level
  InducedEps  exact induced cometric of the model at radius eps
  Omega       curvature coupling term (nonzero only for curved fiber models)
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fiber as fiber_mod
from . import geometry
from .errors import ResolutionError

FORM_NAMES = ("V", "H", "SasakiEps", "InducedEps", "Omega")


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass
class ProductGrid:
    model: object
    n_base: int
    base_x: np.ndarray
    base_h: float
    base_w: np.ndarray
    fiber: object
    weights: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_fiber(self):
        return self.fiber.n_nodes

    @property
    def n(self):
        return self.n_base * self.n_fiber

    def reshape(self, f):
        return np.asarray(f).reshape(self.n_base, self.n_fiber)

    def inner(self, f, g):
        return float(np.sum(self.weights * np.asarray(f) * np.asarray(g)))

    def norm(self, f):
        return math.sqrt(max(self.inner(f, f), 0.0))

    def center_fiber_index(self):
        """Index of the fiber node at the submanifold itself (codim 1 only)."""
        if self.fiber.q != 1:
            raise NotImplementedError("center node only defined on interval fibers")
        j = int(np.argmin(np.abs(self.fiber.s)))
        if abs(self.fiber.s[j]) > 1e-12:
            raise ResolutionError("no fiber node at s = 0; use an odd node count")
        return j

    def fiber_nodes_w(self):
        """Normal-frame coordinates of the fiber nodes, shape (n_fiber, q)."""
        if self.fiber.q == 1:
            return self.fiber.s[:, None]
        return self.fiber.node_w()


def build_grid(model, n_base, n_fiber, n_theta=16):
    """Build the tensor grid for a model; the base is periodic arc length."""
    if isinstance(model, geometry.SyntheticFiberModel):
        if n_base != 1:
            raise ValueError("the synthetic fiber model has a point base: n_base = 1")
        fib = fiber_mod.make_fiber_grid(model.codim, n_fiber, n_theta)
        return ProductGrid(
            model, 1, np.zeros(1), 0.0, np.ones(1), fib, fib.weights.copy()
        )
    if n_base < 8:
        raise ValueError("need at least 8 base nodes")
    if isinstance(model, geometry.CurveInSpace):
        wind = model.total_torsion / (2.0 * math.pi)
        if abs(wind - round(wind)) > 1e-8:
            raise NotImplementedError(
                "grids for space curves need a trivial normal holonomy "
                "(total torsion a multiple of 2*pi)"
            )
    length = model.base_length
    h = length / n_base
    base_x = h * np.arange(n_base)
    fib = fiber_mod.make_fiber_grid(model.codim, n_fiber, n_theta)
    weights = np.kron(np.full(n_base, h), fib.weights)
    return ProductGrid(model, n_base, base_x, h, np.full(n_base, h), fib, weights)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


@dataclass
class DiscreteOperator:
    """Operator represented by its quadratic-form matrix.

    q(f) = f @ form @ f, and the operator action is weights^-1 (form @ f),
    which is symmetric in the weighted inner product by construction."""

    grid: ProductGrid
    form: sp.csr_matrix
    provenance: str
    epsilon: float | None = None

    @property
    def weights(self):
        return self.grid.weights

    def apply(self, f):
        return (self.form @ np.asarray(f)) / self.weights

    def form_value(self, f):
        f = np.asarray(f)
        return float(f @ (self.form @ f))

    def eig(self):
        """Full generalized eigendecomposition (ascending; weighted-orthonormal)."""
        vals, vecs = scipy.linalg.eigh(self.form.toarray(), np.diag(self.weights))
        return vals, vecs

    def to_dict(self, with_spectrum=False, n_eigenvalues=None):
        d = {
            "provenance": self.provenance,
            "epsilon": self.epsilon,
            "n": int(self.form.shape[0]),
            "n_base": int(self.grid.n_base),
            "n_fiber": int(self.grid.n_fiber),
            "nnz": int(self.form.nnz),
        }
        if with_spectrum:
            vals, _ = self.eig()
            if n_eigenvalues is not None:
                vals = vals[:n_eigenvalues]
            d["eigenvalues"] = [float(v) for v in vals]
        return d

    def export_coo(self):
        """Plain text 'i j value' lines of the form matrix, row-major."""
        coo = self.form.tocoo()
        order = np.lexsort((coo.col, coo.row))
        buf = io.StringIO()
        buf.write(f"# form matrix, {self.provenance}, n={coo.shape[0]}\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            buf.write(f"{i} {j} {v:.17g}\n")
        return buf.getvalue()


def _base_difference(grid):
    """Periodic forward-difference matrix on the base, divided by h."""
    n, h = grid.n_base, grid.base_h
    rows = np.repeat(np.arange(n), 2)
    cols = np.stack([np.arange(n), (np.arange(n) + 1) % n], 1).ravel()
    vals = np.tile([-1.0 / h, 1.0 / h], n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _fiber_flat_form(fib):
    if fib.q == 1:
        return fib.dirichlet_form()
    return fib.flat_dirichlet_form()


def _horizontal_form(grid, coeff):
    """Horizontal energy with coefficient g(x_edge_mid, fiber node).

    coeff is an (n_base, n_fiber) array evaluated at base-edge midpoints."""
    if grid.n_base == 1:
        return sp.csr_matrix((grid.n, grid.n))
    Db = _base_difference(grid)
    D = sp.kron(Db, sp.identity(grid.n_fiber, format="csr"), format="csr")
    c = (grid.base_h * grid.fiber.weights[None, :] * coeff).ravel()
    return (D.T @ sp.diags(c) @ D).tocsr()


def _induced_coefficients(grid, eps):
    """Pointwise induced-cometric coefficients on the grid.

    Returns (hor, vert_fiber_form):
      hor: (n_base_edges, n_fiber) horizontal coefficients at edge midpoints;
      vert_fiber_form: fiber form matrix with the induced vertical cometric
      (the vertical block is base-independent for every shipped model)."""
    model = grid.model
    wnodes = grid.fiber_nodes_w()
    # vertical part
    if grid.fiber.q == 1:
        D, lengths, mids = grid.fiber.edges()

        def vcoeff(ms):
            out = np.empty(len(ms))
            for i, s in enumerate(ms):
                cm = geometry.cometric(model, geometry.TubePoint(0.0, [s], eps))
                out[i] = cm.vertical[0, 0]
            return out

        vert = grid.fiber.dirichlet_form(vcoeff)
    else:
        def vrr(rs):
            out = np.empty(len(np.atleast_1d(rs)))
            for i, r in enumerate(np.atleast_1d(rs)):
                cm = geometry.cometric(model, geometry.TubePoint(0.0, [r, 0.0], eps))
                # radial direction at angle 0 is e1; rotational symmetry of the
                # shipped vertical blocks makes the angle irrelevant
                out[i] = cm.vertical[0, 0]
            return out

        def vtt(rs):
            rs = np.atleast_1d(rs)
            out = np.empty(len(rs))
            for i, r in enumerate(rs):
                cm = geometry.cometric(model, geometry.TubePoint(0.0, [r, 0.0], eps))
                assert abs(cm.vertical[0, 1]) < 1e-10 * abs(cm.vertical[0, 0])
                out[i] = cm.vertical[1, 1] / r**2
            return out

        vert = grid.fiber.radial_form(vrr) + grid.fiber.angular_form(vtt)
    # horizontal part
    if grid.n_base == 1:
        return None, vert.tocsr()
    xmid = grid.base_x + 0.5 * grid.base_h
    hor = np.empty((grid.n_base, grid.n_fiber))
    for i, x in enumerate(xmid):
        for j in range(grid.n_fiber):
            cm = geometry.cometric(model, geometry.TubePoint(x, wnodes[j], eps))
            hor[i, j] = cm.horizontal[0, 0]
    return hor, vert.tocsr()


def assemble_form(grid, which, eps=None):
    """Assemble one of the named quadratic forms; results are cached."""
    if which not in FORM_NAMES:
        raise ValueError(f"unknown form {which!r}")
    if which in ("SasakiEps", "InducedEps") and (eps is None or not 0 < eps <= 1):
        raise ValueError("these forms need epsilon in (0, 1]")
    key = (which, eps)
    if key in grid.cache:
        return grid.cache[key]
    if which == "V":
        Q = sp.kron(
            sp.diags(grid.base_w), _fiber_flat_form(grid.fiber), format="csr"
        )
    elif which == "H":
        Q = _horizontal_form(grid, np.ones((grid.n_base, grid.n_fiber)))
    elif which == "SasakiEps":
        Q = (assemble_form(grid, "V") / eps**2 + assemble_form(grid, "H")).tocsr()
    elif which == "InducedEps":
        hor, vert = _induced_coefficients(grid, eps)
        Q = sp.kron(sp.diags(grid.base_w), vert, format="csr")
        if hor is not None:
            Q = (Q + _horizontal_form(grid, hor)).tocsr()
    elif which == "Omega":
        model = grid.model
        if (
            isinstance(model, geometry.SyntheticFiberModel)
            and np.any(model.curvature != 0.0)
        ):
            c = model.pair_component
            ang = grid.fiber.angular_form(lambda r: np.ones_like(np.atleast_1d(r)))
            Q = (-c / 3.0) * sp.kron(sp.diags(grid.base_w), ang, format="csr")
        else:
            # flat-ambient models have no curvature coupling
            Q = sp.csr_matrix((grid.n, grid.n))
    grid.cache[key] = Q.tocsr()
    return grid.cache[key]


def assemble_operator(grid, which, eps=None):
    """Named operators over the grid.

    DeltaV, DeltaH: flat fiber and horizontal Laplacians (commute exactly);
    HSa(eps), H(eps): Sasaki and induced tube operators; P: curvature
    coupling operator built from the rotation fields."""
    if which == "DeltaV":
        return DiscreteOperator(grid, assemble_form(grid, "V"), "DeltaV")
    if which == "DeltaH":
        return DiscreteOperator(grid, assemble_form(grid, "H"), "DeltaH")
    if which == "HSa":
        return DiscreteOperator(grid, assemble_form(grid, "SasakiEps", eps), "HSa", eps)
    if which == "H":
        return DiscreteOperator(grid, assemble_form(grid, "InducedEps", eps), "H", eps)
    if which == "P":
        model = grid.model
        if not isinstance(model, geometry.SyntheticFiberModel):
            return DiscreteOperator(grid, sp.csr_matrix((grid.n, grid.n)), "P")
        zs = fiber_mod.rotation_fields(grid.fiber)
        c = model.pair_component
        Zfull = sp.kron(sp.identity(grid.n_base, format="csr"), zs[0], format="csr")
        Pmat = (c / 3.0) * (Zfull @ Zfull)
        Q = (sp.diags(grid.weights) @ Pmat).tocsr()
        Q = ((Q + Q.T) * 0.5).tocsr()  # symmetric up to roundoff already
        return DiscreteOperator(grid, Q, "P")
    raise ValueError(f"unknown operator {which!r}")


def renormalize(op, lam0, eps=None):
    """Subtract the fiber ground energy: form - (lam0/eps^2) * weights."""
    eps = op.epsilon if eps is None else eps
    if eps is None:
        raise ValueError("operator carries no epsilon; pass one explicitly")
    Q = (op.form - (lam0 / eps**2) * sp.diags(op.weights)).tocsr()
    return DiscreteOperator(op.grid, Q, op.provenance + "0", eps)


def residual_r_eps(grid, eps):
    """First-order metric residual (Induced - Sasaki - Omega) / eps as a form."""
    Q = (
        assemble_form(grid, "InducedEps", eps)
        - assemble_form(grid, "SasakiEps", eps)
        - assemble_form(grid, "Omega")
    ) / eps
    return DiscreteOperator(grid, Q.tocsr(), "residual", eps)


def h1_form(grid):
    """Sasaki energy at eps = 1 (the fixed reference H1 seminorm)."""
    return (assemble_form(grid, "V") + assemble_form(grid, "H")).tocsr()


def residual_h1_bound(grid, eps):
    """Largest |r_eps(f)| over the discrete H1 unit ball (dense pencil)."""
    Q = residual_r_eps(grid, eps).form.toarray()
    B = np.diag(grid.weights) + h1_form(grid).toarray()
    vals = scipy.linalg.eigh(0.5 * (Q + Q.T), B, eigvals_only=True)
    return float(np.max(np.abs(vals)))


def sobolev_norm(grid, f, order):
    """Discrete Sobolev norm of a field: order 0, 1 or 2.

    Order 1 adds the reference tube energy; order 2 adds the squared weighted
    norm of the reference tube Laplacian applied to the field."""
    f = np.asarray(f)
    n0sq = grid.inner(f, f)
    if order == 0:
        return math.sqrt(n0sq)
    Q1 = h1_form(grid)
    n1sq = n0sq + float(f @ (Q1 @ f))
    if order == 1:
        return math.sqrt(n1sq)
    if order == 2:
        lap = (Q1 @ f) / grid.weights
        return math.sqrt(n1sq + grid.inner(lap, lap))
    raise ValueError("order must be 0, 1 or 2")


def random_fields(grid, n_fields, seed):
    """Seeded smoothed random fields for the inequality suites.

    White noise per node, then one smoothing solve (I + DeltaSa/s) f = noise
    with s a Gershgorin bound on the reference Laplacian, which tames the
    grid-scale oscillation without killing high modes entirely."""
    Q1 = h1_form(grid)
    w = grid.weights
    s = float(np.max(np.asarray(abs(Q1).sum(axis=1)).ravel() / w))
    A = (sp.diags(w) + Q1 / s).tocsc()
    solve = spla.factorized(A)
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = np.empty((n_fields, grid.n))
    for i in range(n_fields):
        noise = rng.standard_normal(grid.n)
        out[i] = solve(w * noise)
    return out
