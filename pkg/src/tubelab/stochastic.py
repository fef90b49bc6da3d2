"""Killed, reweighted Brownian motion in a flat tube around the circle.

Paths are ambient planar Brownian motion (variance t per coordinate) started
on the circle.  Conditioning on staying in the tube over the whole horizon is
imposed by a survival flag with a Brownian-bridge exit correction in the
radial coordinate, plus the Feynman-Kac weight exp(1/2 integral U ds) with
U = -1/(4 r^2); the marginal estimator is self-normalized over the ensemble.

Randomness is counter-based: paths are processed in fixed-size blocks and
block b draws from Philox(key=(seed, b)), so results are bit-identical for
any worker count and any block scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConditioning,
    EmptyEnsemble,
    LowEffectiveSampleSize,
    StepSizeError,
)
from .geometry import CircleInPlane

BLOCK_SIZE = 8192
MIN_ESS = 50.0


@dataclass
class PathEnsemble:
    radius: float
    eps: float
    T: float
    dt: float
    t_record: np.ndarray
    theta: np.ndarray        # (n_paths, n_record) angle at record times
    r: np.ndarray            # (n_paths, n_record) radius at record times
    alive: np.ndarray        # (n_paths, n_record) still inside at that time
    survived: np.ndarray     # (n_paths,) inside over the whole horizon
    log_weight: np.ndarray   # (n_paths,) Feynman-Kac log-weight over [0, T]
    survival_steps: np.ndarray  # fraction alive after each step
    seed: int

    @property
    def n_paths(self):
        return self.theta.shape[0]

    def survival_fraction(self):
        return float(np.mean(self.survived))


def sample_conditioned(
    model,
    eps,
    theta0,
    T,
    dt,
    n_paths,
    seed,
    t_record=None,
    kill=True,
    use_potential=True,
    block_size=BLOCK_SIZE,
):
    """Sample the killed, weighted ensemble; see the module docstring.

    t_record times are snapped to the nearest step.  With kill=False the
    tube plays no role and the paths are plain planar Brownian motion."""
    if not isinstance(model, CircleInPlane):
        raise NotImplementedError(
            "path sampling ships for the circle model only (space curves would "
            "need closest-point projection machinery)"
        )
    if n_paths < 1:
        raise EmptyEnsemble("n_paths must be at least 1")
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    if kill and dt > eps**2 / 10.0 + 1e-15:
        raise StepSizeError(f"dt={dt} too coarse for the fiber scale eps^2/10")
    R = model.radius
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise StepSizeError("T must be a whole number of steps")
    t_record = np.array([T]) if t_record is None else np.asarray(t_record, dtype=float)
    rec_steps = np.clip(np.round(t_record / dt).astype(int), 0, n_steps)
    if n_steps not in rec_steps:
        raise ValueError("t_record must include the horizon T")
    n_rec = len(rec_steps)

    theta = np.empty((n_paths, n_rec))
    rad = np.empty((n_paths, n_rec))
    alive_rec = np.empty((n_paths, n_rec), dtype=bool)
    logw = np.empty(n_paths)
    alive_count = np.zeros(n_steps + 1)

    n_blocks = (n_paths + block_size - 1) // block_size
    for b in range(n_blocks):
        lo = b * block_size
        hi = min(lo + block_size, n_paths)
        m = hi - lo
        rng = np.random.Generator(np.random.Philox(key=[seed, b]))
        x = np.full(m, R * math.cos(theta0))
        y = np.full(m, R * math.sin(theta0))
        alive = np.ones(m, dtype=bool)
        w = np.zeros(m)
        u_old = -1.0 / (4.0 * (x * x + y * y))
        rec_idx = np.where(rec_steps == 0)[0]
        for k in rec_idx:
            theta[lo:hi, k] = np.arctan2(y, x)
            rad[lo:hi, k] = np.hypot(x, y)
            alive_rec[lo:hi, k] = alive
        alive_count[0] += m
        sdt = math.sqrt(dt)
        d_old = np.hypot(x, y) - R
        for step in range(1, n_steps + 1):
            # a fixed draw count per step keeps the stream alignment
            # independent of how many paths are still alive
            dx = rng.standard_normal(m) * sdt
            dy = rng.standard_normal(m) * sdt
            u1 = rng.random(m)
            u2 = rng.random(m)
            x += dx
            y += dy
            r_new = np.hypot(x, y)
            d_new = r_new - R
            if kill:
                inside = np.abs(d_new) <= eps
                # bridge correction: probability that the radial excursion
                # touched a wall between the two endpoints
                a_up = np.clip(eps - d_old, 0.0, None)
                b_up = np.clip(eps - d_new, 0.0, None)
                a_dn = np.clip(eps + d_old, 0.0, None)
                b_dn = np.clip(eps + d_new, 0.0, None)
                p_up = np.exp(-2.0 * a_up * b_up / dt)
                p_dn = np.exp(-2.0 * a_dn * b_dn / dt)
                alive &= inside & (u1 >= p_up) & (u2 >= p_dn)
            if use_potential:
                u_new = -1.0 / (4.0 * r_new * r_new)
                w += np.where(alive, 0.5 * dt * (u_old + u_new), 0.0)
                u_old = u_new
            d_old = d_new
            alive_count[step] += int(np.count_nonzero(alive))
            rec_idx = np.where(rec_steps == step)[0]
            for k in rec_idx:
                theta[lo:hi, k] = np.arctan2(y, x)
                rad[lo:hi, k] = r_new
                alive_rec[lo:hi, k] = alive
        logw[lo:hi] = 0.5 * w
    survived = alive_rec[:, int(np.where(rec_steps == n_steps)[0][0])].copy()
    return PathEnsemble(
        R,
        float(eps),
        n_steps * dt,
        float(dt),
        rec_steps * dt,
        theta,
        rad,
        alive_rec,
        survived,
        logw,
        alive_count / n_paths,
        int(seed),
    )


@dataclass
class MarginalEstimate:
    value: float
    std_error: float
    ess: float
    n_survived: int


def marginal_estimate(ensemble, f, t, min_ess=MIN_ESS):
    """Self-normalized estimate of the conditioned marginal E[f(theta_t)].

    Standard error by the delta method for the ratio of weighted sums."""
    k = int(np.argmin(np.abs(ensemble.t_record - t)))
    if abs(ensemble.t_record[k] - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"time {t} was not recorded")
    s = ensemble.survived
    n_surv = int(np.count_nonzero(s))
    if n_surv == 0:
        raise DegenerateConditioning("no path survived the horizon")
    lw = np.where(s, ensemble.log_weight, -np.inf)
    m = np.max(lw)
    b = np.exp(lw - m)
    vals = np.asarray(f(ensemble.theta[:, k]), dtype=float)
    a = b * vals
    bsum = float(np.sum(b))
    ratio = float(np.sum(a)) / bsum
    resid = np.where(s, a - ratio * b, 0.0)
    se = math.sqrt(float(np.sum(resid**2))) / bsum
    ess = bsum**2 / float(np.sum(b**2))
    if ess < min_ess:
        raise LowEffectiveSampleSize(
            f"effective sample size {ess:.1f} below {min_ess}"
        )
    return MarginalEstimate(ratio, se, ess, n_surv)


def circle_heat_oracle(radius, theta0, t, cos_coeffs, sin_coeffs=None):
    """Exact heat semigroup on the circle for a trigonometric polynomial.

    f(theta) = sum_n a_n cos(n theta) + b_n sin(n theta); each mode decays
    as exp(-n^2 t / (2 R^2)) under the generator Delta/2."""
    a = np.asarray(cos_coeffs, dtype=float)
    b = np.zeros_like(a) if sin_coeffs is None else np.asarray(sin_coeffs, dtype=float)
    n = np.arange(len(a))
    decay = np.exp(-(n**2) * t / (2.0 * radius**2))
    return float(np.sum(decay * (a * np.cos(n * theta0) + b * np.sin(n * theta0))))


def planar_bm_angle_cos(radius, t, theta0=0.0, n_quad=120):
    """E[cos(angle of X_t)] for free planar Brownian motion from the circle.

    Exact Gauss-Hermite quadrature of the Gaussian endpoint distribution;
    by rotational symmetry the answer is cos(theta0) times the value at
    angle zero."""
    u, wu = np.polynomial.hermite.hermgauss(n_quad)
    x = radius + math.sqrt(2.0 * t) * u
    y = math.sqrt(2.0 * t) * u
    W = np.outer(wu, wu) / math.pi
    X, Y = np.meshgrid(x, y, indexing="ij")
    val = float(np.sum(W * (X / np.hypot(X, Y))))
    return math.cos(theta0) * val
