"""Small dense linear-algebra helpers shared by the dynamics modules.

The matrix exponential is scipy's scaling-and-squaring Pade implementation;
everything else here (the integrated-exponential block trick, the vectorized
Lyapunov solve, the PSD square root) is a few lines of numpy on matrices of
order <= a few tens, where robustness beats cleverness.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .errors import NotHurwitzError

__all__ = ["expm", "expm_psi", "solve_lyapunov", "sqrtm_psd",
           "spectral_norm", "hurwitz_margin", "require_hurwitz"]

#: Eigenvalue real parts must be below -HURWITZ_TOL to certify decay.
HURWITZ_TOL = 1e-10


def expm_psi(A, t):
    """Return (e^{tA}, psi(t)) with psi(t) the integral of e^{sA} over [0, t].

    Computed from one exponential of the block matrix [[A, I], [0, 0]],
    which stays valid when A is singular (the inverse-based formula for
    psi does not).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = A
    blk[:n, n:] = np.eye(n)
    e = expm(blk * float(t))
    return np.ascontiguousarray(e[:n, :n]), np.ascontiguousarray(e[:n, n:])


def solve_lyapunov(A, Q):
    """Solve A P + P A^T + Q = 0 by vectorizing to a linear system.

    Uses the column-major identities col(AP) = (I kron A) col(P) and
    col(P A^T) = (A kron I) col(P); at the matrix orders handled here the
    dense n^2-by-n^2 solve is cheap and has no special-solver dependency.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    lin = np.kron(eye, A) + np.kron(A, eye)
    vec = np.linalg.solve(lin, -Q.reshape(-1, order="F"))
    P = vec.reshape(n, n, order="F")
    return (P + P.T) / 2.0


def sqrtm_psd(P, clip=1e-10):
    """Symmetric square root of a PSD matrix via its eigendecomposition.

    Eigenvalues in [-clip, 0) are treated as roundoff and clipped to zero;
    more negative ones raise, because the argument is a second-moment
    matrix by contract.
    """
    P = np.asarray(P, dtype=float)
    w, v = np.linalg.eigh((P + P.T) / 2.0)
    if w.min() < -clip * max(1.0, abs(w).max()):
        raise ValueError(f"matrix is not PSD: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def spectral_norm(A):
    return float(np.linalg.norm(np.asarray(A, dtype=float), 2))


def hurwitz_margin(A):
    """Largest eigenvalue real part of A (negative means Hurwitz)."""
    return float(np.linalg.eigvals(np.asarray(A, dtype=float)).real.max())


def require_hurwitz(A, context=""):
    """Return -max Re(eig) or raise :class:`NotHurwitzError`."""
    margin = hurwitz_margin(A)
    if margin >= -HURWITZ_TOL:
        where = f" for {context}" if context else ""
        raise NotHurwitzError(
            f"drift matrix is not Hurwitz{where}: max Re(eig) = {margin:.3e}"
        )
    return -margin
