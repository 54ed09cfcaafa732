from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import scipy.io
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from helmcert.fem import (
    assemble,
    assemble_1d_hp,
    assemble_p1,
    assemble_quad_tensor,
    dump_matrix_market,
    local_p1_mass,
    local_p1_stiffness,
    reduced_monomials,
    reduced_quad_local_matrices,
    reference_1d_matrices,
    system_matrix,
)
from helmcert.mesh import (
    cot_sum,
    make_interval_mesh,
    make_structured_tri_mesh,
    make_talpha,
    make_tensor_quad_mesh,
)

x, y = sympy.symbols("x y")


def lagrange_sym(p):
    nodes = [sympy.Rational(2 * i, p) - 1 for i in range(p + 1)]
    basis = []
    for i, xi in enumerate(nodes):
        f = sympy.Integer(1)
        for j, xj in enumerate(nodes):
            if j != i:
                f *= (x - xj) / (xi - xj)
        basis.append(sympy.expand(f))
    return basis


@pytest.mark.parametrize("p", [1, 2, 3])
def test_reference_1d_against_symbolic(p):
    K, M = reference_1d_matrices(p)
    b = lagrange_sym(p)
    Kr = np.array([[float(sympy.integrate(sympy.diff(u, x) * sympy.diff(v, x), (x, -1, 1))) for v in b] for u in b])
    Mr = np.array([[float(sympy.integrate(u * v, (x, -1, 1))) for v in b] for u in b])
    assert np.allclose(K, Kr, atol=1e-13) and np.allclose(M, Mr, atol=1e-13)


def test_p1_local_matrices_cotangent_formula():
    tri = np.array([[0.0, 0.0], [2.0, 0.3], [0.4, 1.1]])
    A = local_p1_stiffness(tri)
    # off-diagonal entry (i, j) equals -cot(angle at the third vertex) / 2
    def cot(k):
        a, b = tri[(k + 1) % 3] - tri[k], tri[(k + 2) % 3] - tri[k]
        return (a @ b) / abs(a[0] * b[1] - a[1] * b[0])
    assert A[0, 1] == pytest.approx(-cot(2) / 2)
    assert np.allclose(A.sum(axis=1), 0)
    u, v = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
    assert np.allclose(local_p1_mass(tri), area / 12 * (np.ones((3, 3)) + np.eye(3)))


def test_p1_assembly_properties():
    m = make_talpha(0.4)
    s = assemble_p1(m)
    assert s.n == 9
    assert abs(s.A - s.A.T).max() == 0 and abs(s.M - s.M.T).max() == 0
    assert s.M.sum() == pytest.approx(4.0)  # area of (-1, 1)^2
    assert s.B.sum() == pytest.approx(8.0)  # perimeter
    ones = np.ones(9)
    assert np.allclose(s.A @ ones, 0)
    e = m.interior_edges[0]
    assert s.A[e.a, e.b] == pytest.approx(-cot_sum(m, e.key) / 2)


def test_system_matrix_symmetric_unconjugated():
    s = assemble_p1(make_structured_tri_mesh(3, 3))
    K = system_matrix(s, 2.5).K
    assert abs(K - K.T).max() == 0
    with pytest.raises(ValueError):
        system_matrix(s, 0)


@pytest.mark.parametrize("p", [1, 2, 4])
def test_1d_assembly(p):
    s = assemble_1d_hp([0.0, 0.25, 1.0], p)
    assert s.n == 2 * p + 1
    assert s.M.sum() == pytest.approx(1.0)
    assert s.B.sum() == 2 and s.B.nnz == 2
    assert np.allclose(s.A @ np.ones(s.n), 0)
    assert assemble(make_interval_mesh([0.0, 0.25, 1.0]), p).n == s.n


def test_quad_p1_unit_square():
    s = assemble_quad_tensor(make_tensor_quad_mesh([0, 1], [0, 1]), 1)
    assert np.allclose(s.A.diagonal(), 2 / 3)
    assert np.allclose(s.M.diagonal(), 1 / 9)
    assert s.B.sum() == pytest.approx(4.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_quad_tensor_conforming(p):
    m = make_tensor_quad_mesh([0, 0.5, 1.5], [0, 1, 1.25])
    s = assemble_quad_tensor(m, p)
    assert s.n == (2 * p + 1) ** 2
    assert s.M.sum() == pytest.approx(1.5 * 1.25)
    assert s.B.sum() == pytest.approx(2 * (1.5 + 1.25))
    assert np.allclose(s.A @ np.ones(s.n), 0, atol=1e-12)
    # a linear function is reproduced: its gradient energy is |grad|^2 * area
    u = s.dof_coords[:, 0] + 2 * s.dof_coords[:, 1]
    assert u @ (s.A @ u) == pytest.approx(5 * 1.5 * 1.25)


def test_reduced_monomial_order():
    assert reduced_monomials(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.mark.parametrize("p", [1, 2, 3])
def test_reduced_matrices_against_symbolic(p):
    S, Mr = reduced_quad_local_matrices(p)
    bi, bo = (1 + x) * (1 + y), (1 - x) * (1 - y)
    mons = [x**i * y**j for i, j in reduced_monomials(p)]

    def integ(f):
        return sympy.integrate(sympy.expand(f), (x, -1, 1), (y, -1, 1))

    for r, mr in enumerate(mons):
        for c, mc in enumerate(mons):
            u, v = bi * mr, bo * mc
            grad = integ(sympy.diff(u, x) * sympy.diff(v, x) + sympy.diff(u, y) * sympy.diff(v, y))
            assert S[r, c] == Fraction(int(sympy.numer(grad)), int(sympy.denom(grad)))
            mass = integ(u * v)
            assert Mr[r, c] == Fraction(int(sympy.numer(mass)), int(sympy.denom(mass)))


def test_matrix_market_dump(tmp_path):
    s = assemble_p1(make_talpha(0.4))
    paths = dump_matrix_market(s, tmp_path, k=1.0)
    assert sorted(p.name for p in paths) == ["A.mtx", "B.mtx", "K.mtx", "M.mtx"]
    A = scipy.io.mmread(str(tmp_path / "A.mtx"))
    assert np.allclose(A.toarray(), s.A.toarray())


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=6), st.integers(1, 5))
def test_1d_mass_positive_definite(widths, p):
    s = assemble_1d_hp(np.concatenate([[0], np.cumsum(widths)]), p)
    assert np.linalg.eigvalsh(s.M.toarray()).min() > 0
