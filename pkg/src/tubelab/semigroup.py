"""Heat propagators, resolvents, and the epsilon-collapse convergence study.

Propagators are built from a symmetric eigendecomposition of the weighted
form pencil, so semigroup laws hold to solver accuracy.  Above a size
cutoff only the spectrally relevant bottom of the spectrum is kept: a mode
at distance d above the bottom contributes a factor exp(-t*d/2) <= 1e-18
over the time grid and is dropped; the cutoff is recorded on the object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import discretize, fiber as fiber_mod, geometry
from .errors import CoercivityViolation, DegenerateConditioning, ResolutionError

DENSE_CUTOFF = 2600


class Propagator:
    """exp(-t * A / 2) for the operator of a weighted form pencil."""

    def __init__(self, form, weights, t_min=0.05, dense_cutoff=DENSE_CUTOFF):
        self.weights = np.asarray(weights, dtype=float)
        n = len(self.weights)
        self.truncated = False
        if n <= dense_cutoff:
            vals, vecs = scipy.linalg.eigh(
                np.asarray(form.todense()) if sp.issparse(form) else np.asarray(form),
                np.diag(self.weights),
            )
        else:
            # keep the bottom of the spectrum; modes further than `span` above
            # the minimum are invisible at times >= t_min in double precision
            span = 2.0 * 41.0 / t_min
            Qc = form.tocsc()
            M = sp.diags(self.weights).tocsc()
            rowsum = np.asarray(abs(Qc).sum(axis=1)).ravel()
            diag = Qc.diagonal()
            lower = float(np.min((diag - (rowsum - np.abs(diag))) / self.weights))
            k = min(max(64, n // 50), n - 2)
            while True:
                vals, vecs = spla.eigsh(Qc, k=k, M=M, sigma=lower - 1.0, which="LM")
                order = np.argsort(vals)
                vals, vecs = vals[order], vecs[:, order]
                if vals[-1] - vals[0] >= span or k >= n - 2:
                    break
                k = min(2 * k, n - 2)
            self.truncated = True
        self.eigenvalues = vals
        self.eigenvectors = vecs

    def apply(self, t, f):
        if t < 0:
            raise ValueError("time must be nonnegative")
        coef = self.eigenvectors.T @ (self.weights * np.asarray(f))
        return self.eigenvectors @ (np.exp(-0.5 * t * self.eigenvalues) * coef)


def propagate(op, t, f):
    """Apply exp(-t/2 * op); the eigendecomposition is cached on the operator."""
    prop = getattr(op, "_propagator", None)
    if prop is None:
        prop = Propagator(op.form, op.weights)
        op._propagator = prop
    return prop.apply(t, f)


def base_laplacian(grid):
    """(form, weights) of the Laplacian on the base circle alone."""
    if grid.n_base == 1:
        return sp.csr_matrix((1, 1)), grid.base_w
    Db = discretize._base_difference(grid)
    Q = (Db.T @ sp.diags(np.full(grid.n_base, grid.base_h)) @ Db).tocsr()
    return Q, grid.base_w


def limit_propagate(grid, spectrum, t, f, base_prop=None):
    """Limit semigroup: project to the ground fiber state, run base heat flow."""
    if base_prop is None:
        Qb, wb = base_laplacian(grid)
        base_prop = Propagator(Qb, wb)
    fb = fiber_mod.extract_fb(grid, spectrum, f)
    gb = base_prop.apply(t, fb)
    return np.outer(gb, spectrum.ground_state).ravel()


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------


def phi_functional(op_h0, alpha, w_field, f):
    """The quadratic functional whose unique minimizer is the resolvent."""
    f = np.asarray(f)
    g = op_h0.grid
    return 0.5 * (op_h0.form_value(f) + alpha * g.inner(f, f)) - g.inner(w_field, f)


def resolvent_minimizer(op_h0, alpha, w_field, residual_tol=1e-10):
    """Minimize phi, i.e. solve (H0 + alpha) f = w in the weighted sense.

    Raises CoercivityViolation when the shifted pencil is not positive
    definite (epsilon outside the coercive range)."""
    g = op_h0.grid
    W = sp.diags(g.weights)
    A = (op_h0.form + alpha * W).tocsc()
    n = A.shape[0]
    if n <= DENSE_CUTOFF:
        mineig = float(
            scipy.linalg.eigh(
                A.toarray(), np.diag(g.weights), eigvals_only=True, subset_by_index=[0, 0]
            )[0]
        )
    else:
        mineig = float(
            spla.eigsh(A, k=1, M=W.tocsc(), sigma=-1e3, which="LM", return_eigenvectors=False)[0]
        )
    if mineig <= 0:
        raise CoercivityViolation(
            f"shifted operator indefinite (min eigenvalue {mineig:.3e}); "
            "epsilon is outside the coercive range"
        )
    f = spla.spsolve(A, g.weights * np.asarray(w_field))
    resid = (A @ f) / g.weights - np.asarray(w_field)
    rel = g.norm(resid) / max(g.norm(w_field), 1e-300)
    if rel > residual_tol:
        raise ResolutionError(f"resolvent residual {rel:.3e} above {residual_tol}")
    return f, {"residual": rel, "min_eigenvalue": mineig}


# ---------------------------------------------------------------------------
# conditioned flow (operator route)
# ---------------------------------------------------------------------------


def conditional_flow_operator(grid, spectrum, eps, T, t, f_base, propagator=None):
    """Two-sided heat-flow ratio giving the conditioned marginal on the base.

    f_base: values of the observable on the base nodes (lifted fiberwise).
    Returns the ratio field evaluated on the submanifold (fiber center)."""
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    lam0 = spectrum.lambda0
    if propagator is None:
        h = discretize.assemble_operator(grid, "H", eps)
        h0 = discretize.renormalize(h, lam0)
        propagator = Propagator(h0.form, h0.weights, t_min=min(0.05, max(t, T - t, 1e-3)))
    wnodes = grid.fiber_nodes_w()
    sqrt_rho = np.empty(grid.n)
    for i, x in enumerate(grid.base_x):
        for j in range(grid.n_fiber):
            p = geometry.TubePoint(x, wnodes[j], eps)
            sqrt_rho[i * grid.n_fiber + j] = math.sqrt(geometry.density_rho(grid.model, p))
    f_lift = np.repeat(np.asarray(f_base, dtype=float), grid.n_fiber)
    num = propagator.apply(t, f_lift * propagator.apply(T - t, sqrt_rho))
    den = propagator.apply(T, sqrt_rho)
    jc = grid.center_fiber_index()
    num_c = grid.reshape(num)[:, jc]
    den_c = grid.reshape(den)[:, jc]
    if np.any(np.abs(den_c) < 1e-12):
        raise DegenerateConditioning("survival factor vanishes on the base")
    return num_c / den_c


# ---------------------------------------------------------------------------
# convergence sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    eps_list: list
    t_grid: np.ndarray
    norms: tuple
    records: list            # dicts: eps, t, err_L2, err_H1, err_H2
    sup_errors: dict         # norm -> array over eps
    fitted_order: float
    r_squared: float
    lambda0: float
    n_base: int
    n_fiber: int
    spatial_error_estimate: float | None = None
    runtimes: dict = field(default_factory=dict)

    def rows(self):
        return [
            [r["eps"], r["t"]] + [r[f"err_{nm}"] for nm in self.norms]
            for r in self.records
        ]


def default_t_grid(n=10, t_min=0.1, t_max=1.0):
    return np.linspace(t_min, t_max, n)


def default_sweep_field(grid, spectrum):
    """phi0 times (1 + cos(theta)/2) on the base circle."""
    radius = grid.model.base_length / (2.0 * math.pi)
    fb = 1.0 + 0.5 * np.cos(grid.base_x / radius)
    return np.outer(fb, spectrum.ground_state).ravel()


def _loglog_fit(eps, err):
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    p, b = np.polyfit(x, y, 1)
    yhat = p * x + b
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(p), r2


def _sweep_errors(grid, spectrum, eps_list, t_grid, u_builder, norms):
    import time

    Qb, wb = base_laplacian(grid)
    base_prop = Propagator(Qb, wb)
    lam0 = spectrum.lambda0
    records, runtimes = [], {}
    order_map = {"L2": 0, "H1": 1, "H2": 2}
    for eps in eps_list:
        t0 = time.perf_counter()
        h0 = discretize.renormalize(discretize.assemble_operator(grid, "H", eps), lam0)
        prop = Propagator(h0.form, h0.weights, t_min=float(t_grid[0]))
        u = u_builder(grid, spectrum, eps)
        for t in t_grid:
            diff = prop.apply(t, u) - limit_propagate(grid, spectrum, t, u, base_prop)
            rec = {"eps": float(eps), "t": float(t)}
            for nm in norms:
                rec[f"err_{nm}"] = discretize.sobolev_norm(grid, diff, order_map[nm])
            records.append(rec)
        runtimes[float(eps)] = time.perf_counter() - t0
    return records, runtimes


def convergence_sweep(
    model,
    n_base,
    n_fiber,
    eps_list,
    t_grid=None,
    u_builder=None,
    norms=("L2", "H1", "H2"),
    n_theta=16,
    pre_check=False,
    pre_check_factor=1.5,
):
    """Collapse study: propagate under the renormalized tube operator and
    compare against the limit semigroup, over a decreasing epsilon list."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if u_builder is None:
        u_builder = lambda g, s, eps: default_sweep_field(g, s)
    grid = discretize.build_grid(model, n_base, n_fiber, n_theta)
    spectrum = fiber_mod.fiber_spectrum(grid.fiber, n_modes=6)
    records, runtimes = _sweep_errors(grid, spectrum, eps_list, t_grid, u_builder, norms)
    sup = {
        nm: np.array(
            [
                max(r[f"err_{nm}"] for r in records if r["eps"] == eps)
                for eps in eps_list
            ]
        )
        for nm in norms
    }
    p, r2 = _loglog_fit(eps_list, sup["L2"])
    spatial = None
    if pre_check:
        nb2 = int(round(n_base * pre_check_factor))
        nf2 = int(round(n_fiber * pre_check_factor))
        if grid.fiber.q == 1 and nf2 % 2 == 0:
            nf2 += 1
        g2 = discretize.build_grid(model, nb2, nf2, n_theta)
        s2 = fiber_mod.fiber_spectrum(g2.fiber, n_modes=6)
        rec2, _ = _sweep_errors(g2, s2, eps_list[:1], t_grid, u_builder, ("L2",))
        sup2 = max(r["err_L2"] for r in rec2)
        spatial = abs(float(sup["L2"][0]) - sup2)
        if spatial > float(sup["L2"][0]) / 10.0:
            raise ResolutionError(
                f"spatial error estimate {spatial:.3e} above a tenth of the "
                f"coarsest model error {float(sup['L2'][0]):.3e}; refine the grid"
            )
    return SweepResult(
        eps_list,
        t_grid,
        tuple(norms),
        records,
        sup,
        p,
        r2,
        spectrum.lambda0,
        n_base,
        n_fiber,
        spatial,
        runtimes,
    )
