"""Closed-form energy optimization of the quadratic deviation growth.

The second derivative of the deviation at t = 0 is a convex quadratic in
the energy vector E, with gradient 8(2RE + K) and Hessian 16R for the
matrix R = mho^T (P kron Sigma) mho and a vector K assembled from the
coupling-dependent pieces of the dynamics.  Maximizing the quadratic
decoherence-time expansion over E is therefore the stationarity problem
2RE + K = 0: unique when R is positive definite, minimum-norm with a
flagged null space when R is singular, and E = 0 is optimal exactly when
K vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import sections_dot
from .decoherence import decoherence_time, tau_expansion, tau_hat
from .errors import InconclusiveCrossingError, StationarityError
from .model import coefficients, ito_matrix, lambda_matrix
from .moments import delta_derivatives0


@dataclass(frozen=True)
class OptimalityData:
    """Stationarity data 2RE + K = 0 and its solution."""

    R: np.ndarray
    K: np.ndarray
    E_star: np.ndarray
    residual: float
    zero_energy_optimal: bool
    unique: bool
    null_dim: int


def rk_matrices(sys, init, weights):
    """The pair (R, K) of the energy-stationarity system.

    R = mho^T (P kron Sigma) mho, evaluated by the double sum
    sum_jk P_jk Theta_j^T Sigma Theta_k; K collects the coupling terms:
    mho^T col(Sigma (Atilde P + Re Lambda(0)/2 + b mu0^T)) plus, for a
    nonzero initial mean, the vector of Frobenius pairings of
    mho Sigma mho^T with Re((beta . (Theta . mu0)_col_k) kron M^T Omega M).
    Both are independent of the energy vector of ``sys``.
    """
    n = sys.n
    sc = sys.sc
    Sigma = weights.Sigma
    P, mu0 = init.P, init.mu0
    th = sc.theta.sections

    TS = np.einsum("jba,bc,kcd->jkad", th, Sigma, th, optimize=True)
    R = np.einsum("jk,jkad->ad", P, TS)
    R = (R + R.T) / 2.0

    co = coefficients(sys)
    lam0 = lambda_matrix(sys, mu0)
    S = Sigma @ (co.Atilde @ P + 0.5 * lam0.real + np.outer(co.b, mu0))
    K = np.einsum("kba,bk->a", th, S)

    if np.abs(mu0).max() > 0.0:
        Omega, _ = ito_matrix(sys.m)
        G = sys.M.T @ Omega @ sys.M
        msm = sc.mho @ Sigma @ sc.mho.T
        theta_mu = sections_dot(sc.theta, mu0)
        extra = np.empty(n)
        for k in range(n):
            bv = sections_dot(sc.beta, theta_mu[:, k])
            extra[k] = np.sum(msm * np.kron(bv, G).real)
        K = K + extra
    return R, K


def optimal_energy(R, K, tol=None):
    """Solve the stationarity system 2RE + K = 0.

    With R positive definite (smallest eigenvalue above ``tol``) the
    solution is unique.  A singular R yields the minimum-norm solution
    flagged non-unique with its null-space dimension, provided K lies in
    the range of R; otherwise the inputs are inconsistent with convexity
    and :class:`StationarityError` is raised.  ``tol`` defaults to the
    scale-aware 1e-10 * trace(R)/n.
    """
    R = np.asarray(R, dtype=float)
    K = np.asarray(K, dtype=float)
    n = R.shape[0]
    if tol is None:
        tol = 1e-10 * float(np.trace(R)) / n
    w, v = np.linalg.eigh((R + R.T) / 2.0)
    ktol = max(tol, 1e-12 * max(1.0, float(np.abs(K).max(initial=0.0))))

    if w.min() > tol:
        e_star = -0.5 * np.linalg.solve(R, K)
        unique, null_dim = True, 0
    else:
        keep = w > tol
        null_dim = int(n - keep.sum())
        coef = v.T @ K
        out_of_range = float(np.linalg.norm(coef[~keep]))
        if out_of_range > ktol:
            raise StationarityError(
                f"K has a component of norm {out_of_range:.3e} outside the "
                "range of a singular R; the quadratic would be unbounded "
                "below along a null direction, contradicting its convexity"
            )
        e_star = v[:, keep] @ (-0.5 * coef[keep] / w[keep])
        unique = False

    residual = float(np.linalg.norm(2.0 * R @ e_star + K))
    zero_opt = float(np.abs(K).max(initial=0.0)) <= ktol
    return OptimalityData(R=R, K=K, E_star=e_star, residual=residual,
                          zero_energy_optimal=zero_opt, unique=unique,
                          null_dim=null_dim)


@dataclass(frozen=True)
class GradientReport:
    """Analytic vs central-difference gradient of the quadratic growth."""

    E_probe: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    max_abs_dev: float
    max_rel_dev: float


def gradient_check(sys, init, weights, E_probe):
    """Compare 8(2RE + K) with central differences of the second
    deviation derivative; report-only."""
    E_probe = np.asarray(E_probe, dtype=float)
    R, K = rk_matrices(sys, init, weights)
    analytic = 8.0 * (2.0 * R @ E_probe + K)

    h = 1e-5 * (1.0 + float(np.abs(E_probe).max(initial=0.0)))
    numeric = np.empty_like(analytic)
    for k in range(E_probe.size):
        bump = np.zeros_like(E_probe)
        bump[k] = h
        _, up = delta_derivatives0(sys.with_energy(E_probe + bump), init, weights)
        _, dn = delta_derivatives0(sys.with_energy(E_probe - bump), init, weights)
        numeric[k] = (up - dn) / (2.0 * h)

    max_abs = float(np.abs(analytic - numeric).max())
    scale = max(1.0, float(np.abs(analytic).max()))
    return GradientReport(E_probe=E_probe, analytic=analytic, numeric=numeric,
                          max_abs_dev=max_abs, max_rel_dev=max_abs / scale)


@dataclass(frozen=True)
class SuboptimalEntry:
    label: str
    E: np.ndarray
    delta_ddot0: float
    tau_hat: float
    tau: float  # may be inf; None when the search was inconclusive


@dataclass(frozen=True)
class SuboptimalityReport:
    """tau-hat and tau at the stationary energy and at comparison points.

    The quadratic approximation is maximal at the stationary energy by
    construction (that is asserted here); the ordering of the exact tau
    values is reported as data and not asserted.
    """

    epsilon: float
    entries: tuple
    tau_hat_maximal: bool


def suboptimal_tau_report(sys, init, weights, eps, comparisons=(), opts=None):
    """Evaluate tau-hat and tau at the optimal energy and at the supplied
    comparison energies."""
    R, K = rk_matrices(sys, init, weights)
    best = optimal_energy(R, K)
    energies = [("optimal", best.E_star)]
    energies += [(f"comparison[{i}]", np.asarray(E, dtype=float))
                 for i, E in enumerate(comparisons)]

    entries = []
    for label, E in energies:
        sys_e = sys.with_energy(E)
        expn = tau_expansion(sys_e, init, weights)
        t_hat = tau_hat(expn, eps)
        try:
            tau = decoherence_time(sys_e, init, weights, eps, opts=opts).value
        except InconclusiveCrossingError:
            tau = None
        entries.append(SuboptimalEntry(label=label, E=E,
                                       delta_ddot0=expn.delta_ddot0,
                                       tau_hat=t_hat, tau=tau))
    ref = entries[0].tau_hat
    slack = 1e-12 * max(1.0, abs(ref))
    maximal = all(ref >= e.tau_hat - slack for e in entries)
    return SuboptimalityReport(epsilon=eps, entries=tuple(entries),
                               tau_hat_maximal=maximal)
