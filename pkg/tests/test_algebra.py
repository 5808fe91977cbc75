import numpy as np
import pytest

from qmemtime.algebra import (SectionArray, StructureConstants, col,
                              pauli_structure, sections_diamond, sections_dot,
                              stack_mho, validate_structure)
from qmemtime.errors import StructureDefectError

from oracles import col_loop, diamond_loop, dot_loop, mho_loop

THETA1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
THETA2 = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
THETA3 = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def test_pauli_structure_constants(pauli):
    assert np.array_equal(pauli.alpha, np.eye(3))
    assert np.array_equal(pauli.theta.section(0), THETA1)
    assert np.array_equal(pauli.theta.section(1), THETA2)
    assert np.array_equal(pauli.theta.section(2), THETA3)
    assert np.array_equal(pauli.beta.sections, 1j * pauli.theta.sections)


def test_section_array_slice_consistency():
    rng = np.random.default_rng(0)
    g = SectionArray(rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4)))
    for j in range(4):
        for k in range(4):
            for ell in range(4):
                assert g.section(ell)[j, k] == g.entry(j, k, ell)
                assert g.mid_slice(k)[j, ell] == g.entry(j, k, ell)
                assert g.first_slice(j)[k, ell] == g.entry(j, k, ell)


def test_sections_dot_zero(pauli):
    assert np.all(sections_dot(pauli.beta, np.zeros(3)) == 0)


def test_sections_dot_basis_vector_picks_section(pauli):
    assert np.array_equal(sections_dot(pauli.theta, np.array([0.0, 0.0, 1.0])), THETA3)


def test_sections_dot_matches_loop_oracle(pauli):
    out = sections_dot(pauli.beta, np.array([0.0, 0.0, 4.0]))
    assert np.abs(out - 4j * THETA3).max() == 0.0
    assert np.abs(out - dot_loop(pauli.beta.sections, [0, 0, 4])).max() == 0.0


def test_sections_diamond_zero(pauli):
    assert np.all(sections_diamond(pauli.theta, np.zeros(3)) == 0)


def test_diamond_is_cross_product_generator(pauli):
    rng = np.random.default_rng(1)
    for _ in range(100):
        u, v = rng.standard_normal(3), rng.standard_normal(3)
        lhs = sections_diamond(pauli.theta, u) @ v
        assert np.abs(lhs - np.cross(u, v)).max() <= 1e-12
    u = np.array([1.0, 2.0, 3.0])
    expected = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    assert np.array_equal(sections_diamond(pauli.theta, u), expected)


def test_dot_diamond_kron_identity():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(2, 6))
        g = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        lhs = dot_loop(g, u) @ v
        mid = diamond_loop(g, v) @ u
        flat = np.hstack([g[ell] for ell in range(n)]) @ np.kron(u, v)
        assert np.abs(lhs - mid).max() <= 1e-12
        assert np.abs(lhs - flat).max() <= 1e-12
        assert np.abs(sections_dot(g, u) @ v - lhs).max() <= 1e-12
        assert np.abs(sections_diamond(g, v) @ u - lhs).max() <= 1e-12


def test_products_linear_in_u():
    rng = np.random.default_rng(3)
    g = rng.standard_normal((5, 5, 5)) + 1j * rng.standard_normal((5, 5, 5))
    u, v = rng.standard_normal(5), rng.standard_normal(5)
    a, bcoef = 0.7, -1.3
    for op in (sections_dot, sections_diamond):
        lhs = op(g, a * u + bcoef * v)
        rhs = a * op(g, u) + bcoef * op(g, v)
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_stack_mho_zero():
    assert np.all(stack_mho(np.zeros((3, 3, 3))) == 0)


def test_stack_mho_pauli_rows(pauli):
    mho = stack_mho(pauli.theta)
    assert mho.shape == (9, 3)
    assert np.array_equal(mho, mho_loop(pauli.theta.sections))
    assert np.array_equal(mho[0:3], THETA1)
    assert np.array_equal(mho[3:6], THETA2)
    assert np.array_equal(mho[6:9], THETA3)


def test_mho_vectorization_contract(pauli):
    rng = np.random.default_rng(4)
    mho = stack_mho(pauli.theta)
    for _ in range(20):
        E = rng.standard_normal(3)
        lhs = col(2.0 * sections_diamond(pauli.theta, E))
        assert np.abs(np.asarray(lhs) - 2.0 * mho @ E).max() <= 1e-14
        S = rng.standard_normal((3, 3))
        back = sum(pauli.theta.section(k).T @ S[:, k] for k in range(3))
        assert np.abs(mho.T @ col_loop(S) - back).max() <= 1e-14


def test_mho_sandwich_kron_identity(pauli):
    rng = np.random.default_rng(5)
    mho = stack_mho(pauli.theta)
    th = pauli.theta.sections
    for _ in range(10):
        P = rng.standard_normal((3, 3))
        P = P + P.T
        S = rng.standard_normal((3, 3))
        S = S + S.T
        lhs = mho.T @ np.kron(P, S) @ mho
        rhs = sum(P[j, k] * th[j].T @ S @ th[k] for j in range(3) for k in range(3))
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_validate_structure_pauli_passes(pauli):
    report = validate_structure(pauli.alpha, pauli.beta.sections, tol=1e-14)
    assert report.passed
    assert report.worst_defect == 0.0


def test_validate_structure_locates_alpha_defect(pauli):
    alpha = pauli.alpha.copy()
    alpha[0, 2] += 1e-3
    report = validate_structure(alpha, pauli.beta.sections, tol=1e-12)
    assert not report.passed
    assert report.worst_index[0] == "alpha"
    assert set(report.worst_index[1:]) == {0, 2}
    assert report.alpha_asymmetry == pytest.approx(1e-3)


def test_validate_structure_flags_nonhermitian_section(pauli):
    beta = pauli.beta.sections.copy()
    beta[1, 0, 2] += 1e-6
    report = validate_structure(pauli.alpha, beta, tol=1e-9)
    assert not report.passed
    assert report.worst_index[0] in ("beta", "theta")


def test_construction_rejects_large_defects(pauli):
    alpha = pauli.alpha.copy()
    alpha[1, 0] += 5e-3
    with pytest.raises(StructureDefectError):
        StructureConstants(alpha, pauli.beta.sections)


def test_construction_repairs_roundoff_defects(pauli):
    alpha = pauli.alpha.copy()
    alpha[1, 0] += 1e-14
    sc = StructureConstants(alpha, pauli.beta.sections)
    assert np.array_equal(sc.alpha, sc.alpha.T)
    th = sc.theta.sections
    assert np.array_equal(th, -np.transpose(th, (0, 2, 1)))


def test_dimension_mismatch_rejected(pauli):
    with pytest.raises(ValueError):
        sections_dot(pauli.beta, np.zeros(4))
    with pytest.raises(ValueError):
        sections_diamond(pauli.beta, np.zeros(2))
