import numpy as np
import pytest

from qmemtime.errors import StationarityError
from qmemtime.model import SystemParams, coefficients, lambda_matrix
from qmemtime.moments import (delta_derivatives0, initial_moments,
                              weighting_from_sigma)
from qmemtime.optimize import (gradient_check, optimal_energy, rk_matrices,
                               suboptimal_tau_report)


def test_rk_worked_example(worked):
    R, K = rk_matrices(worked.sys, worked.init, worked.weights)
    assert np.abs(R - 2.0 * np.eye(3)).max() <= 1e-12
    assert np.abs(K).max() <= 1e-12


def test_k_assembly_from_parts(worked):
    # Atilde P + Re Lambda(0) / 2 + b mu0^T vanishes entry by entry here
    parts = (worked.co.Atilde @ worked.init.P
             + 0.5 * lambda_matrix(worked.sys, worked.init.mu0).real
             + np.outer(worked.co.b, worked.init.mu0))
    assert np.abs(parts).max() <= 1e-12


def test_k_zero_without_coupling(pauli, worked):
    sys = SystemParams(sc=pauli, E=np.array([0.3, -0.2, 0.5]),
                       M=np.zeros((2, 3)), N=np.zeros(2))
    R, K = rk_matrices(sys, worked.init, worked.weights)
    assert np.abs(K).max() == 0.0
    R_ref, _ = rk_matrices(worked.sys, worked.init, worked.weights)
    assert np.abs(R - R_ref).max() == 0.0


def test_r_independent_of_energy_and_coupling(pauli, worked):
    rng = np.random.default_rng(30)
    R_ref, _ = rk_matrices(worked.sys, worked.init, worked.weights)
    for _ in range(5):
        sys = SystemParams(sc=pauli, E=rng.standard_normal(3),
                           M=rng.standard_normal((4, 3)),
                           N=rng.standard_normal(4))
        R, _ = rk_matrices(sys, worked.init, worked.weights)
        assert np.abs(R - R_ref).max() == 0.0


def test_rk_independent_of_probe_energy(worked):
    R1, K1 = rk_matrices(worked.sys, worked.init, worked.weights)
    R2, K2 = rk_matrices(worked.sys.with_energy(np.array([1.0, -2.0, 3.0])),
                         worked.init, worked.weights)
    assert np.abs(R1 - R2).max() == 0.0
    assert np.abs(K1 - K2).max() == 0.0


def test_optimal_energy_worked(worked):
    od = optimal_energy(worked.R, worked.K)
    assert np.abs(od.E_star).max() == 0.0
    assert od.zero_energy_optimal
    assert od.unique
    assert od.residual == 0.0


def test_optimal_energy_diagonal_solve():
    od = optimal_energy(2.0 * np.eye(3), np.array([2.0, 0.0, 0.0]))
    assert np.abs(od.E_star - np.array([-0.5, 0.0, 0.0])).max() <= 1e-14
    assert not od.zero_energy_optimal


def test_optimal_energy_singular_minimum_norm():
    od = optimal_energy(np.diag([2.0, 2.0, 0.0]), np.array([2.0, 0.0, 0.0]))
    assert np.abs(od.E_star - np.array([-0.5, 0.0, 0.0])).max() <= 1e-12
    assert not od.unique
    assert od.null_dim == 1


def test_optimal_energy_infeasible_raises():
    with pytest.raises(StationarityError):
        optimal_energy(np.diag([2.0, 2.0, 0.0]), np.array([0.0, 0.0, 1.0]))


def test_gradient_identity_worked(worked):
    report = gradient_check(worked.sys, worked.init, worked.weights,
                            np.array([0.0, 0.0, 1.0]))
    assert np.abs(report.analytic - np.array([0.0, 0.0, 32.0])).max() <= 1e-12
    assert report.max_rel_dev <= 1e-5


def test_gradient_vanishes_at_stationary_point(worked):
    R, K = rk_matrices(worked.sys, worked.init, worked.weights)
    od = optimal_energy(R, K)
    report = gradient_check(worked.sys, worked.init, worked.weights, od.E_star)
    assert np.abs(report.numeric).max() <= 1e-6 * max(
        1.0, np.abs(report.analytic).max())


def test_gradient_identity_random_instances(make_instance):
    rng = np.random.default_rng(31)
    for _ in range(10):
        sys, init = make_instance(rng)
        sigma = rng.standard_normal((3, 3))
        w = weighting_from_sigma(sigma @ sigma.T + 0.5 * np.eye(3))
        report = gradient_check(sys, init, w, rng.standard_normal(3))
        assert report.max_rel_dev <= 1e-5


def test_hessian_matches_curvature(worked, make_instance):
    rng = np.random.default_rng(32)
    sys, init = make_instance(rng)
    w = weighting_from_sigma(np.eye(3))
    R, _ = rk_matrices(sys, init, w)
    h = 1e-4
    H = np.empty((3, 3))

    def ddot(E):
        return delta_derivatives0(sys.with_energy(E), init, w)[1]

    E0 = rng.standard_normal(3)
    for j in range(3):
        for k in range(3):
            ej = np.zeros(3); ej[j] = h
            ek = np.zeros(3); ek[k] = h
            H[j, k] = (ddot(E0 + ej + ek) - ddot(E0 + ej - ek)
                       - ddot(E0 - ej + ek) + ddot(E0 - ej - ek)) / (4 * h * h)
    assert np.abs(H - 16.0 * R).max() <= 1e-4 * max(1.0, np.abs(16.0 * R).max())


def test_stationary_point_is_global_minimum(make_instance):
    rng = np.random.default_rng(33)
    sys, init = make_instance(rng)
    w = weighting_from_sigma(np.eye(3))
    R, K = rk_matrices(sys, init, w)
    od = optimal_energy(R, K)
    base = delta_derivatives0(sys.with_energy(od.E_star), init, w)[1]
    for _ in range(50):
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        assert base <= delta_derivatives0(
            sys.with_energy(od.E_star + d), init, w)[1] + 1e-10


def test_zero_k_means_zero_energy_stationary(worked):
    R, K = rk_matrices(worked.sys, worked.init, worked.weights)
    assert np.abs(K).max() <= 1e-12
    report = gradient_check(worked.sys, worked.init, worked.weights, np.zeros(3))
    assert np.abs(report.numeric).max() <= 1e-8


def test_suboptimal_report_worked(worked):
    report = suboptimal_tau_report(
        worked.sys, worked.init, worked.weights, eps=0.01,
        comparisons=[np.zeros(3), np.array([1.0, 0.0, 0.0]),
                     np.array([0.0, 0.0, 1.0])])
    assert report.tau_hat_maximal
    best = report.entries[0]
    assert np.abs(best.E).max() <= 1e-12
    for entry in report.entries[1:]:
        assert best.tau_hat >= entry.tau_hat - 1e-12
    # the zero-energy comparison coincides with the optimum
    assert report.entries[1].tau_hat == pytest.approx(best.tau_hat, abs=1e-15)
    assert all(e.tau is not None for e in report.entries)


def test_suboptimal_quadratic_convexity(make_instance):
    rng = np.random.default_rng(34)
    sys, init = make_instance(rng)
    w = weighting_from_sigma(np.eye(3))
    R, K = rk_matrices(sys, init, w)
    od = optimal_energy(R, K)
    report = suboptimal_tau_report(
        sys, init, w, eps=0.05,
        comparisons=[od.E_star + rng.standard_normal(3) for _ in range(3)])
    assert report.tau_hat_maximal
