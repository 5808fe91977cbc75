"""Exact first- and second-moment dynamics and their steady-state limits.

The mean follows mu(t) = e^{tA} mu(0) + psi(t) b with psi the integrated
exponential; the noise-response second moment V solves the Lyapunov ODE
V' = A V + V A^T + Lambda(mu(t)) from V(0) = 0; and the weighted
mean-square deviation of the variables from their initial values is

    Delta(t) = <Sigma, (e^{tA}-I) Pi (e^{tA}-I)^T + cross terms + V(t)>_Re,

assembled in closed form from (e^{tA}, psi(t), Re V(t)).  Fixed-step
fourth-order Runge-Kutta integrates V (see :mod:`qmemtime.kernels`);
matrix exponentials come from scaling-and-squaring, and the steady-state
second moment solves the algebraic Lyapunov equation by vectorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import sections_dot
from .errors import (AdmissibilityError, IntegrationError,
                     InternalConsistencyError)
from .kernels import integrate_grid
from .linalg import expm_psi, require_hurwitz, solve_lyapunov, spectral_norm
from .model import coefficients, lambda_affine, lambda_dot0, lambda_matrix

#: Mean-square deviations in [-NEG_DELTA_TOL, 0) are clipped to zero;
#: anything more negative indicates an internal inconsistency.
NEG_DELTA_TOL = 1e-10

#: RK4 substep target: STEP_SAFETY / max(1, ||A||_2), also capped by the
#: grid spacing.
STEP_SAFETY = 0.01


@dataclass(frozen=True)
class InitialMoments:
    """Initial mean mu0 with the derived second-moment pair (P, Pi).

    Pi = P + i Theta . mu0 is the second-moment matrix of the initial
    variables and must be PSD (up to roundoff) for mu0 to be admissible;
    P = Re Pi = alpha + Re(beta) . mu0.
    """

    mu0: np.ndarray
    P: np.ndarray
    Pi: np.ndarray


def initial_moments(sc, mu0, tol=1e-10):
    """Build :class:`InitialMoments`, rejecting inadmissible means."""
    mu0 = np.ascontiguousarray(np.asarray(mu0, dtype=float))
    if mu0.shape != (sc.n,):
        raise ValueError(f"initial mean has shape {mu0.shape}, expected ({sc.n},)")
    P = sc.alpha + sections_dot(sc.re_beta, mu0)
    P = (P + P.T) / 2.0
    Pi = P + 1j * sections_dot(sc.theta, mu0)
    lam_min = float(np.linalg.eigvalsh(Pi).min())
    if lam_min < -tol:
        raise AdmissibilityError(
            f"initial mean gives an indefinite second-moment matrix "
            f"(min eigenvalue {lam_min:.3e} < -{tol:g})"
        )
    for arr in (mu0, P, Pi):
        arr.setflags(write=False)
    return InitialMoments(mu0=mu0, P=P, Pi=Pi)


@dataclass(frozen=True)
class WeightingSpec:
    """Weighting matrix Sigma = F^T F with a full-row-rank factor F."""

    Sigma: np.ndarray
    F: np.ndarray
    nu: int


def weighting_from_sigma(Sigma, rank_tol=1e-12):
    """Factor a PSD weighting matrix as Sigma = F^T F."""
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise ValueError(f"weighting matrix must be square, got {Sigma.shape}")
    if np.abs(Sigma - Sigma.T).max() > 1e-10 * max(1.0, np.abs(Sigma).max()):
        raise ValueError("weighting matrix is not symmetric")
    Sigma = (Sigma + Sigma.T) / 2.0
    w, v = np.linalg.eigh(Sigma)
    scale = max(1.0, float(w.max(initial=0.0)))
    if w.min(initial=0.0) < -1e-10 * scale:
        raise ValueError(f"weighting matrix is not PSD (min eigenvalue {w.min():.3e})")
    keep = w > rank_tol * scale
    F = np.sqrt(w[keep])[:, None] * v[:, keep].T
    if np.abs(Sigma - F.T @ F).max() > 1e-10 * scale:
        raise InternalConsistencyError("weighting factorization residual above 1e-10")
    Sigma.setflags(write=False)
    F.setflags(write=False)
    return WeightingSpec(Sigma=Sigma, F=F, nu=int(keep.sum()))


def weighting_from_factor(F):
    """Wrap an explicit full-row-rank factor F."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ValueError("factor must be a 2-d array")
    if np.linalg.matrix_rank(F) < F.shape[0]:
        raise ValueError("factor rows are linearly dependent; full row rank required")
    Sigma = F.T @ F
    Sigma = (Sigma + Sigma.T) / 2.0
    F = F.copy()
    Sigma.setflags(write=False)
    F.setflags(write=False)
    return WeightingSpec(Sigma=Sigma, F=F, nu=F.shape[0])


@dataclass(frozen=True)
class MomentTrajectory:
    """Moments along a grid: mean, second moment of the noise response,
    and the weighted mean-square deviation from the initial variables."""

    grid: np.ndarray
    mu: np.ndarray
    V: np.ndarray
    Delta: np.ndarray


def psi_matrix(A, t):
    """Integral of e^{sA} over [0, t], valid for singular A."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return expm_psi(A, t)[1]


def _validate_grid(grid):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("grid must be a 1-d array with at least two nodes")
    if g[0] != 0.0:
        raise ValueError(f"grid must start at t=0, got t0={g[0]}")
    if not np.all(np.diff(g) > 0):
        raise ValueError("grid must be strictly increasing")
    return g


def _substep_plan(A, grid, h_cap=None):
    """Split grid intervals into RK4 substeps and build step-exponential
    tables, one table entry per distinct substep size.

    Each interval is covered by equal substeps no longer than the interval
    itself and no longer than STEP_SAFETY / max(1, ||A||_2).
    """
    dts = np.diff(grid)
    cap = STEP_SAFETY / max(1.0, spectral_norm(A))
    if h_cap is not None:
        cap = min(cap, float(h_cap))
    nsub = np.maximum(1, np.ceil(dts / cap - 1e-12)).astype(np.int64)
    h_arr = dts / nsub

    table = {}
    tab = np.empty(dts.size, dtype=np.int64)
    for k, h in enumerate(h_arr):
        if h not in table:
            table[h] = len(table)
        tab[k] = table[h]
    n = A.shape[0]
    size = len(table)
    Eh_t = np.empty((size, n, n))
    psih_t = np.empty((size, n, n))
    Eh2_t = np.empty((size, n, n))
    psih2_t = np.empty((size, n, n))
    for h, idx in table.items():
        Eh_t[idx], psih_t[idx] = expm_psi(A, h)
        Eh2_t[idx], psih2_t[idx] = expm_psi(A, h / 2.0)
    return nsub, tab, h_arr, (Eh_t, psih_t, Eh2_t, psih2_t)


def _affine_parts(sys):
    """Real/imaginary affine components of Lambda(mu), kernel layout."""
    C0, Cmu = lambda_affine(sys)
    n = sys.n
    L0 = np.ascontiguousarray(C0.real)
    LmuT = np.ascontiguousarray(Cmu.real.reshape(n, n * n).T)
    LI0 = np.ascontiguousarray(C0.imag)
    LImuT = np.ascontiguousarray(Cmu.imag.reshape(n, n * n).T)
    return L0, LmuT, LI0, LImuT


def _clean_delta(delta):
    worst = float(delta.min())
    if worst < -NEG_DELTA_TOL:
        raise InternalConsistencyError(
            f"mean-square deviation fell to {worst:.3e}, below -{NEG_DELTA_TOL:g}"
        )
    return np.where(delta < 0.0, 0.0, delta)


def moment_trajectory(sys, init, weights, grid, backend=None):
    """Integrate (mu, V, Delta) over ``grid``; the workhorse behind
    :func:`second_moment_V`, :func:`deviation_delta`, and the CLI export.

    ``weights`` may be None when only (mu, V) are of interest; Delta is
    then reported for Sigma = I.
    """
    grid = _validate_grid(grid)
    co = coefficients(sys)
    L0, LmuT, LI0, LImuT = _affine_parts(sys)
    Sigma = weights.Sigma if weights is not None else np.eye(sys.n)
    nsub, tab, h_arr, tables = _substep_plan(co.A, grid)
    mu, vre, vim, delta = integrate_grid(
        co.A, co.b, init.mu0, init.P, Sigma, L0, LmuT, LI0, LImuT,
        nsub, tab, h_arr, *tables, backend=backend)
    if not (np.isfinite(vre).all() and np.isfinite(mu).all()):
        raise IntegrationError(
            f"second-moment integration produced non-finite values "
            f"(substep {h_arr.min():.3e}..{h_arr.max():.3e}, drift norm "
            f"{spectral_norm(co.A):.3e})"
        )
    return MomentTrajectory(grid=grid, mu=mu, V=vre + 1j * vim,
                            Delta=_clean_delta(delta))


def mean_trajectory(coeffs, init, grid):
    """Mean vector along ``grid`` from the closed form e^{tA} mu0 + psi(t) b."""
    grid = _validate_grid(grid)
    out = np.empty((grid.size, init.mu0.size))
    for i, t in enumerate(grid):
        Et, pt = expm_psi(coeffs.A, t)
        out[i] = Et @ init.mu0 + pt @ coeffs.b
    return out


def mean_limit(coeffs):
    """Steady-state mean -A^{-1} b; raises NotHurwitzError otherwise."""
    require_hurwitz(coeffs.A, context="the steady-state mean")
    return -np.linalg.solve(coeffs.A, coeffs.b)


def second_moment_V(sys, init, grid, backend=None):
    """Second moment V(t_k) of the noise response along ``grid``."""
    return moment_trajectory(sys, init, None, grid, backend=backend).V


def deviation_delta(sys, init, weights, grid, backend=None):
    """Weighted mean-square deviation Delta(t_k) along ``grid``."""
    return moment_trajectory(sys, init, weights, grid, backend=backend).Delta


def delta_derivatives0(sys, init, weights):
    """First two right-hand derivatives of Delta at t = 0.

    The first is <Sigma, Re Lambda(0)> and is nonnegative; the second is
    <Sigma, 2APA^T + 2A(Re Lambda(0) + 2 mu0 b^T) + Re Lambda'(0)>
    + 2|Fb|^2, quadratic and convex in the energy vector through A.
    """
    co = coefficients(sys)
    Sigma = weights.Sigma
    lam0 = lambda_matrix(sys, init.mu0)
    lamd = lambda_dot0(sys, init.mu0)
    d1 = float(np.sum(Sigma * lam0.real))
    inner = (2.0 * co.A @ init.P @ co.A.T
             + 2.0 * co.A @ (lam0.real + 2.0 * np.outer(init.mu0, co.b))
             + lamd.real)
    d2 = float(np.sum(Sigma * inner) + 2.0 * co.b @ Sigma @ co.b)
    return d1, d2


@dataclass(frozen=True)
class SteadyState:
    """Limits of the moment dynamics when the drift is Hurwitz."""

    mu_inf: np.ndarray
    P_inf: np.ndarray
    Lambda_inf: np.ndarray
    Delta_inf: float


def steady_state(sys, init, weights):
    """Steady-state (mu, P, Lambda, Delta) for a Hurwitz drift.

    P_inf solves A P + P A^T + Re Lambda_inf = 0; the limit deviation is
    <Sigma, P> - 2 mu_inf^T Sigma mu0 + |F mu_inf|^2 + <Sigma, P_inf>,
    whose sign is not asserted (the cross term may be negative).
    """
    co = coefficients(sys)
    require_hurwitz(co.A, context="steady-state moments")
    mu_inf = -np.linalg.solve(co.A, co.b)
    lam_inf = lambda_matrix(sys, mu_inf)
    P_inf = solve_lyapunov(co.A, lam_inf.real)
    resid = np.abs(co.A @ P_inf + P_inf @ co.A.T + lam_inf.real).max()
    if resid > 1e-10 * max(1.0, np.abs(lam_inf.real).max()):
        raise InternalConsistencyError(
            f"algebraic Lyapunov residual {resid:.3e} exceeds 1e-10"
        )
    Sigma = weights.Sigma
    delta_inf = float(np.sum(Sigma * init.P)
                      - 2.0 * mu_inf @ Sigma @ init.mu0
                      + mu_inf @ Sigma @ mu_inf
                      + np.sum(Sigma * P_inf))
    return SteadyState(mu_inf=mu_inf, P_inf=P_inf, Lambda_inf=lam_inf,
                       Delta_inf=delta_inf)


def reference_norm(init, weights):
    """The weighted size <Sigma, P> = ||F sqrt(P)||^2 of the initial
    variables, against which deviations are measured."""
    return float(np.sum(weights.Sigma * init.P))
