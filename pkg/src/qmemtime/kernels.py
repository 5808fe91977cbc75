"""Fixed-step integration kernels, with optional numba acceleration.

The two hot loops of the package live here: integrating the second-moment
Lyapunov ODE along a time grid, and marching the mean-square deviation
forward until it first crosses a threshold.  Both advance the transition
matrix e^{tA} and its integral psi(t) by exact one-step recurrences (the
step exponentials are precomputed outside the loop) and take classical
fourth-order Runge-Kutta steps for the second moment, whose source term
is affine in the mean.

Each kernel is written once as a plain numpy function and compiled with
``numba.njit`` on demand.  The environment variable ``QMEMTIME_BACKEND``
selects the default path: ``numba`` (require the compiled kernels),
``numpy`` (force the pure-numpy fallback), or ``auto`` (numba if
importable).  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_ENV_FLAG = "QMEMTIME_BACKEND"


def _requested_backend():
    raw = os.environ.get(_ENV_FLAG, "auto").strip().lower() or "auto"
    if raw not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG}={raw!r}; expected 'auto', 'numba' or 'numpy'")
    if raw == "numba" and numba is None:
        raise ValueError(f"{_ENV_FLAG}=numba but numba is not importable")
    if raw == "auto":
        return "numba" if numba is not None else "numpy"
    return raw


_BACKEND = _requested_backend()
_JITTED = {}


def active_backend():
    """The backend used when no per-call override is given."""
    return _BACKEND


def _dispatch(name, core, backend):
    backend = backend or _BACKEND
    if backend == "numpy":
        return core
    if numba is None:
        raise ValueError("numba backend requested but numba is not importable")
    if name not in _JITTED:
        _JITTED[name] = numba.njit(cache=True, nogil=True)(core)
    return _JITTED[name]


def delta_closed_form(E, psi, Vre, mu0, b, P, Sigma):
    """Mean-square deviation at one instant from (e^{tA}, psi(t), Re V(t)).

    Python-side twin of the expression inlined in the kernels; used by the
    bisection refinement, which evaluates off the marching grid.
    """
    n = E.shape[0]
    q = E - np.eye(n)
    w = psi @ b
    return (np.sum((q @ P) * (Sigma @ q))
            + 2.0 * w @ (Sigma @ (q @ mu0))
            + w @ (Sigma @ w)
            + np.sum(Sigma * Vre))


# ---------------------------------------------------------------------------
# Kernel cores (numba-compilable numpy subset: contiguous dots, views, loops).


def _march_core(A, b, mu0, P, Sigma, L0, LmuT,
                Eh, psih, Eh2, psih2, h, t0, threshold, nsteps,
                E0, psi0, V0, d0):
    """March the deviation with step h until it exceeds ``threshold``.

    Returns (status, steps, t_last, d_last, d_next, E, psi, V, sup_d):
    status 1 means a crossing was bracketed in [t_last, t_last + h] and the
    returned state belongs to the left endpoint; status 0 means no crossing
    within ``nsteps`` and the state belongs to the final node; status -1
    flags non-finite values (integration failure) at the returned step.
    """
    n = A.shape[0]
    eye = np.eye(n)
    E = E0.copy()
    psi = psi0.copy()
    V = V0.copy()
    d = d0
    sup_d = d0
    for k in range(1, nsteps + 1):
        mu_t = np.dot(E, mu0) + np.dot(psi, b)
        E_mid = np.dot(E, Eh2)
        psi_mid = psi + np.dot(E, psih2)
        mu_mid = np.dot(E_mid, mu0) + np.dot(psi_mid, b)
        E_nxt = np.dot(E, Eh)
        psi_nxt = psi + np.dot(E, psih)
        mu_nxt = np.dot(E_nxt, mu0) + np.dot(psi_nxt, b)

        y1 = np.dot(A, V)
        k1 = y1 + y1.T + L0 + np.dot(LmuT, mu_t).reshape((n, n))
        v2 = V + (0.5 * h) * k1
        y2 = np.dot(A, v2)
        k2 = y2 + y2.T + L0 + np.dot(LmuT, mu_mid).reshape((n, n))
        v3 = V + (0.5 * h) * k2
        y3 = np.dot(A, v3)
        k3 = y3 + y3.T + L0 + np.dot(LmuT, mu_mid).reshape((n, n))
        v4 = V + h * k3
        y4 = np.dot(A, v4)
        k4 = y4 + y4.T + L0 + np.dot(LmuT, mu_nxt).reshape((n, n))
        V_nxt = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        q = E_nxt - eye
        w = np.dot(psi_nxt, b)
        d_next = (np.sum(np.dot(q, P) * np.dot(Sigma, q))
                  + 2.0 * np.dot(w, np.dot(Sigma, np.dot(q, mu0)))
                  + np.dot(w, np.dot(Sigma, w))
                  + np.sum(Sigma * V_nxt))
        if not np.isfinite(d_next):
            return -1, k, t0 + (k - 1) * h, d, d_next, E, psi, V, sup_d
        if d_next > threshold:
            return 1, k, t0 + (k - 1) * h, d, d_next, E, psi, V, sup_d
        if d_next > sup_d:
            sup_d = d_next
        E = E_nxt
        psi = psi_nxt
        V = V_nxt
        d = d_next
    return 0, nsteps, t0 + nsteps * h, d, np.nan, E, psi, V, sup_d


def _trajectory_core(A, b, mu0, P, Sigma, L0, LmuT, LI0, LImuT,
                     nsub, tab, h_arr, Eh_t, psih_t, Eh2_t, psih2_t):
    """Integrate (mu, V, Delta) over a grid with per-interval substeps.

    ``nsub[k]`` substeps of size ``h_arr[k]`` cover grid interval k, using
    the step-exponential tables indexed by ``tab[k]``.  The real and
    imaginary parts of V evolve under decoupled real Lyapunov ODEs (the
    drift is real) with symmetric and antisymmetric source terms.
    """
    nint = nsub.shape[0]
    n = A.shape[0]
    eye = np.eye(n)
    mu_out = np.empty((nint + 1, n))
    vre_out = np.empty((nint + 1, n, n))
    vim_out = np.empty((nint + 1, n, n))
    d_out = np.empty(nint + 1)

    E = np.eye(n)
    psi = np.zeros((n, n))
    Vre = np.zeros((n, n))
    Vim = np.zeros((n, n))
    mu_out[0] = mu0
    vre_out[0] = Vre
    vim_out[0] = Vim
    d_out[0] = 0.0

    for kk in range(nint):
        h = h_arr[kk]
        idx = tab[kk]
        Eh = Eh_t[idx]
        psih = psih_t[idx]
        Eh2 = Eh2_t[idx]
        psih2 = psih2_t[idx]
        for _ in range(nsub[kk]):
            mu_t = np.dot(E, mu0) + np.dot(psi, b)
            E_mid = np.dot(E, Eh2)
            psi_mid = psi + np.dot(E, psih2)
            mu_mid = np.dot(E_mid, mu0) + np.dot(psi_mid, b)
            E_nxt = np.dot(E, Eh)
            psi_nxt = psi + np.dot(E, psih)
            mu_nxt = np.dot(E_nxt, mu0) + np.dot(psi_nxt, b)

            y1 = np.dot(A, Vre)
            k1 = y1 + y1.T + L0 + np.dot(LmuT, mu_t).reshape((n, n))
            v2 = Vre + (0.5 * h) * k1
            y2 = np.dot(A, v2)
            k2 = y2 + y2.T + L0 + np.dot(LmuT, mu_mid).reshape((n, n))
            v3 = Vre + (0.5 * h) * k2
            y3 = np.dot(A, v3)
            k3 = y3 + y3.T + L0 + np.dot(LmuT, mu_mid).reshape((n, n))
            v4 = Vre + h * k3
            y4 = np.dot(A, v4)
            k4 = y4 + y4.T + L0 + np.dot(LmuT, mu_nxt).reshape((n, n))
            Vre = Vre + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

            z1 = np.dot(A, Vim)
            w1 = z1 - z1.T + LI0 + np.dot(LImuT, mu_t).reshape((n, n))
            u2 = Vim + (0.5 * h) * w1
            z2 = np.dot(A, u2)
            w2 = z2 - z2.T + LI0 + np.dot(LImuT, mu_mid).reshape((n, n))
            u3 = Vim + (0.5 * h) * w2
            z3 = np.dot(A, u3)
            w3 = z3 - z3.T + LI0 + np.dot(LImuT, mu_mid).reshape((n, n))
            u4 = Vim + h * w3
            z4 = np.dot(A, u4)
            w4 = z4 - z4.T + LI0 + np.dot(LImuT, mu_nxt).reshape((n, n))
            Vim = Vim + (h / 6.0) * (w1 + 2.0 * w2 + 2.0 * w3 + w4)

            E = E_nxt
            psi = psi_nxt

        mu_out[kk + 1] = np.dot(E, mu0) + np.dot(psi, b)
        vre_out[kk + 1] = Vre
        vim_out[kk + 1] = Vim
        q = E - eye
        w = np.dot(psi, b)
        d_out[kk + 1] = (np.sum(np.dot(q, P) * np.dot(Sigma, q))
                         + 2.0 * np.dot(w, np.dot(Sigma, np.dot(q, mu0)))
                         + np.dot(w, np.dot(Sigma, w))
                         + np.sum(Sigma * Vre))

    return mu_out, vre_out, vim_out, d_out


# ---------------------------------------------------------------------------
# Dispatching wrappers.


def _c(a):
    return np.ascontiguousarray(np.asarray(a, dtype=float))


def march_first_crossing(A, b, mu0, P, Sigma, L0, LmuT, Eh, psih, Eh2, psih2,
                         h, t0, threshold, nsteps, E0, psi0, V0, d0,
                         backend=None):
    core = _dispatch("march", _march_core, backend)
    return core(_c(A), _c(b), _c(mu0), _c(P), _c(Sigma), _c(L0), _c(LmuT),
                _c(Eh), _c(psih), _c(Eh2), _c(psih2),
                float(h), float(t0), float(threshold), int(nsteps),
                _c(E0), _c(psi0), _c(V0), float(d0))


def integrate_grid(A, b, mu0, P, Sigma, L0, LmuT, LI0, LImuT,
                   nsub, tab, h_arr, Eh_t, psih_t, Eh2_t, psih2_t,
                   backend=None):
    core = _dispatch("trajectory", _trajectory_core, backend)
    return core(_c(A), _c(b), _c(mu0), _c(P), _c(Sigma),
                _c(L0), _c(LmuT), _c(LI0), _c(LImuT),
                np.ascontiguousarray(nsub, dtype=np.int64),
                np.ascontiguousarray(tab, dtype=np.int64),
                _c(h_arr), _c(Eh_t), _c(psih_t), _c(Eh2_t), _c(psih2_t))
