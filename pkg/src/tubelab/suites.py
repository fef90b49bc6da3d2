"""Inequality and structure suites shared by the CLI and the test battery.

Each suite returns a plain dict of measurements plus an "ok" flag so the
CLI can serialize it directly.  The inequalities are the discrete versions
of the collapse estimates; they hold exactly (up to roundoff slack) because
the discrete operators have the same tensor structure the proofs use.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from . import discretize, fiber as fiber_mod, semigroup

REL_SLACK = 1e-9


def _full_fiber_eigenvalues(fib):
    if fib.q == 1:
        Q = fib.dirichlet_form()
    else:
        Q = fib.flat_dirichlet_form()
    return scipy.linalg.eigh(Q.toarray(), np.diag(fib.weights), eigvals_only=True)


def admissible_eps_bound(spectrum):
    """Largest tube radius for which the vertical-energy bounds apply."""
    return 1.0 - spectrum.lambda0 / spectrum.lambda1


def composite_spectrum_check(grid, eps, tol=1e-9):
    """Every eigenvalue of the product operator is a fiber level over eps^2
    plus a base level; checked against independent 1-dimensional solves."""
    hsa = discretize.assemble_operator(grid, "HSa", eps)
    vals2d, _ = hsa.eig()
    fib_vals = _full_fiber_eigenvalues(grid.fiber)
    Qb, wb = semigroup.base_laplacian(grid)
    base_vals = scipy.linalg.eigh(Qb.toarray(), np.diag(wb), eigvals_only=True)
    composite = np.sort((fib_vals[:, None] / eps**2 + base_vals[None, :]).ravel())
    scale = np.maximum(np.abs(composite), 1.0)
    rel = float(np.max(np.abs(np.sort(vals2d) - composite) / scale))
    return {"eps": eps, "max_rel_error": rel, "ok": bool(rel <= tol)}


def _form_values(grid, fields, spectrum, eps):
    """Per-field values of every form the inequality suites need."""
    qv = discretize.assemble_form(grid, "V")
    qh = discretize.assemble_form(grid, "H")
    qi = discretize.assemble_form(grid, "InducedEps", eps)
    qs = discretize.assemble_form(grid, "SasakiEps", eps)
    lam0 = spectrum.lambda0
    w = grid.weights
    out = []
    for f in fields:
        n0sq = float(np.sum(w * f * f))
        vV = float(f @ (qv @ f))
        vH = float(f @ (qh @ f))
        vI = float(f @ (qi @ f))
        vS = float(f @ (qs @ f))
        e0 = fiber_mod.project_E0(grid, spectrum, f)
        e0sq = float(np.sum(w * e0 * e0))
        q0_sa = vS - lam0 / eps**2 * n0sq
        q0_ind = vI - lam0 / eps**2 * n0sq
        h1sq = n0sq + vV + vH
        out.append(
            dict(
                n0sq=n0sq, vV=vV, vH=vH, vI=vI, vS=vS, e0sq=e0sq,
                q0_sa=q0_sa, q0_ind=q0_ind, h1sq=h1sq,
            )
        )
    return out


def vertical_energy_suite(grid, spectrum, eps_list, fields):
    """Discrete vertical-energy bounds against the renormalized form:
    (a) q_V(f) <= k * (eps * q0(f) + |E0 f|^2) with k = max(1, lambda0);
    (b) q_Sa,1(f) <= q0(f) + lambda0 |E0 f|^2,
    both for eps up to 1 - lambda0/lambda1."""
    lam0 = spectrum.lambda0
    k_sa = max(1.0, lam0)
    bound = admissible_eps_bound(spectrum)
    violations, worst_a, worst_b = 0, -np.inf, -np.inf
    for eps in eps_list:
        if eps > bound:
            raise ValueError(f"eps={eps} above the admissible bound {bound:.4f}")
        vals = _form_values(grid, fields, spectrum, eps)
        for v in vals:
            rhs_a = k_sa * (eps * v["q0_sa"] + v["e0sq"])
            rhs_b = v["q0_sa"] + lam0 * v["e0sq"]
            slack = REL_SLACK * max(abs(v["vV"]), abs(rhs_a), 1.0)
            if v["vV"] > rhs_a + slack:
                violations += 1
            worst_a = max(worst_a, v["vV"] - rhs_a)
            lhs_b = v["vV"] + v["vH"]  # Sasaki energy at eps = 1
            slack = REL_SLACK * max(abs(lhs_b), abs(rhs_b), 1.0)
            if lhs_b > rhs_b + slack:
                violations += 1
            worst_b = max(worst_b, lhs_b - rhs_b)
    return {
        "k_sa": k_sa,
        "admissible_eps": bound,
        "violations": violations,
        "worst_margin_a": worst_a,
        "worst_margin_b": worst_b,
        "n_fields": len(fields),
        "ok": violations == 0,
    }


def metric_perturbation_suite(grid, spectrum, eps_list, fields):
    """One constant, fit at the coarsest eps, bounds the induced-minus-Sasaki
    form error |l_eps(f)| <= k_l * eps * (q0(f) + |f|_H1^2) across the sweep."""
    ratios = {}
    for eps in eps_list:
        vals = _form_values(grid, fields, spectrum, eps)
        r = [
            abs(v["vI"] - v["vS"]) / (eps * (v["q0_sa"] + v["h1sq"]))
            for v in vals
        ]
        ratios[eps] = float(np.max(r))
    k_l = ratios[eps_list[0]]
    ok = all(ratios[e] <= k_l * (1.0 + REL_SLACK) for e in eps_list)
    return {"k_l": k_l, "max_ratio_per_eps": ratios, "ok": bool(ok)}


def coercivity_suite(grid, spectrum, eps_list, fields, alpha=None):
    """Uniform lower bound of the shifted renormalized form against the H1
    norm; reports the worst constant over the sweep."""
    lam0 = spectrum.lambda0
    alpha = lam0 + 1.5 if alpha is None else alpha
    bound = admissible_eps_bound(spectrum)
    inadmissible = [e for e in eps_list if e > bound]
    c_min = np.inf
    for eps in eps_list:
        if eps > bound:
            continue
        vals = _form_values(grid, fields, spectrum, eps)
        for v in vals:
            c_min = min(c_min, (v["q0_ind"] + alpha * v["n0sq"]) / v["h1sq"])
    return {
        "alpha": alpha,
        "admissible_eps": bound,
        "inadmissible_eps": inadmissible,
        "coercivity_constant": float(c_min) if np.isfinite(c_min) else None,
        "ok": bool(not inadmissible and np.isfinite(c_min) and c_min > 0),
    }


def sasaki_limit_check(grid, spectrum, eps_list, t_grid, mixing=0.5):
    """Hard semigroup bound: the distance from the product-metric flow to the
    projected base flow is at most exp(-t (lambda1-lambda0)/(2 eps^2)).

    The probe field mixes the ground fiber state with a first excited one.
    The comparison carries an absolute allowance of 1e-8 * |f| because the
    bound underflows for small eps while the eigensolver leaves roundoff of
    that order in the propagated field."""
    lam0, lam1 = spectrum.lambda0, spectrum.lambda1
    phi0 = spectrum.ground_state
    phi1 = spectrum.eigenfunctions[:, spectrum.multiplets[1][0]]
    radius = grid.model.base_length / (2.0 * math.pi)
    g0 = 1.0 + 0.5 * np.cos(grid.base_x / radius)
    g1 = mixing * (1.0 + np.cos(grid.base_x / radius))
    f = (np.outer(g0, phi0) + np.outer(g1, phi1)).ravel()
    nf = grid.norm(f)
    Qb, wb = semigroup.base_laplacian(grid)
    base_prop = semigroup.Propagator(Qb, wb)
    worst = -np.inf
    ok = True
    for eps in eps_list:
        hsa0 = discretize.renormalize(
            discretize.assemble_operator(grid, "HSa", eps), lam0
        )
        prop = semigroup.Propagator(hsa0.form, hsa0.weights, t_min=float(np.min(t_grid)))
        for t in t_grid:
            lhs = grid.norm(
                prop.apply(t, f)
                - semigroup.limit_propagate(grid, spectrum, t, f, base_prop)
            )
            rhs = math.exp(-t * (lam1 - lam0) / (2.0 * eps**2)) * nf
            if lhs > rhs * (1.0 + 1e-10) + 1e-8 * nf:
                ok = False
            worst = max(worst, lhs - rhs)
    return {"ok": bool(ok), "worst_margin": worst}


def curvature_coupling_suite(model, n_fiber, n_theta, seed, n_fields=20):
    """The coupling operator kills the ground band and commutes with the
    fiber Laplacian; both checked on random smoothed fields."""
    grid = discretize.build_grid(model, 1, n_fiber, n_theta)
    spectrum = fiber_mod.fiber_spectrum(grid.fiber, n_modes=6)
    P = discretize.assemble_operator(grid, "P")
    dv = discretize.assemble_operator(grid, "DeltaV")
    fields = discretize.random_fields(grid, n_fields, seed)
    r_proj, r_comm = 0.0, 0.0
    for f in fields:
        e0 = fiber_mod.project_E0(grid, spectrum, f)
        r_proj = max(r_proj, grid.norm(P.apply(e0)) / grid.norm(f))
        comm = dv.apply(P.apply(f)) - P.apply(dv.apply(f))
        r_comm = max(r_comm, grid.norm(comm) / discretize.sobolev_norm(grid, f, 2))
    return {
        "n_fiber": n_fiber,
        "proj_ratio": r_proj,
        "commutator_ratio": r_comm,
        "ok": bool(r_proj <= 1e-6 and r_comm <= 1e-4),
    }
