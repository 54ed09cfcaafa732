"""Assembly of stiffness, mass and boundary-mass matrices.

Covers P1 triangles, continuous hp elements on intervals and tensor-product
Lagrange elements on axis-parallel rectangles, plus the exact reduced local
system on the reference square ``[-1, 1]^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh, MeshError, make_interval_mesh
from .rational import RationalMatrix


@dataclass
class SystemMatrices:
    """Real symmetric Gram matrices of one discrete space.

    ``dof_coords[i]`` is the position of the nodal point behind row ``i``;
    ``boundary_dofs`` lists the rows whose basis function has a non-zero
    boundary trace.
    """

    A: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    dof_coords: np.ndarray
    boundary_dofs: np.ndarray
    p: int = 1
    vertex_dofs: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass
class ComplexSystem:
    K: sp.csr_matrix
    k: float


def system_matrix(sys: SystemMatrices, k: float) -> ComplexSystem:
    """``K = A - k^2 M - i k B``."""
    if k == 0:
        raise ValueError("the wave number k must be non-zero")
    k = float(k)
    K = (sys.A - (k * k) * sys.M).astype(complex) - (1j * k) * sys.B
    return ComplexSystem(sp.csr_matrix(K), k)


# -- P1 triangles -----------------------------------------------------------------


def _p1_gradients(tri: np.ndarray) -> tuple[np.ndarray, float]:
    tri = np.asarray(tri, dtype=float)
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    if not det > 0:
        raise MeshError("triangle must be positively oriented with non-zero area")
    # rows: gradients of the barycentric coordinates
    g = np.array([
        [tri[1, 1] - tri[2, 1], tri[2, 0] - tri[1, 0]],
        [tri[2, 1] - tri[0, 1], tri[0, 0] - tri[2, 0]],
        [tri[0, 1] - tri[1, 1], tri[1, 0] - tri[0, 0]],
    ]) / det
    return g, det / 2


def local_p1_stiffness(tri) -> np.ndarray:
    g, area = _p1_gradients(tri)
    return area * (g @ g.T)


def local_p1_mass(tri) -> np.ndarray:
    _, area = _p1_gradients(tri)
    return area / 12 * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


def local_edge_mass(edge) -> np.ndarray:
    p, q = np.asarray(edge, dtype=float)
    L = float(np.hypot(*(q - p)))
    if L == 0:
        raise MeshError("zero-length edge")
    return L / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])


def _boundary_mass_p1(mesh: Mesh) -> sp.csr_matrix:
    n = mesh.n_nodes
    rows, cols, vals = [], [], []
    for e in mesh.boundary_edges:
        ids = (e.a, e.b)
        Be = local_edge_mass(mesh.nodes[list(ids)])
        for i in range(2):
            for j in range(2):
                rows.append(ids[i]); cols.append(ids[j]); vals.append(Be[i, j])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_p1(mesh: Mesh) -> SystemMatrices:
    if mesh.kind != "tri3":
        raise MeshError("P1 assembly needs a triangular mesh")
    n = mesh.n_nodes
    rows, cols, av, mv = [], [], [], []
    for conn in mesh.elements:
        tri = mesh.nodes[conn]
        Ae, Me = local_p1_stiffness(tri), local_p1_mass(tri)
        for i in range(3):
            for j in range(3):
                rows.append(conn[i]); cols.append(conn[j])
                av.append(Ae[i, j]); mv.append(Me[i, j])
    A = sp.csr_matrix((av, (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((mv, (rows, cols)), shape=(n, n))
    B = _boundary_mass_p1(mesh)
    bnd = np.array(sorted(mesh.boundary_nodes), dtype=int)
    return SystemMatrices(A, M, B, mesh.nodes.copy(), bnd, 1, np.arange(n))


# -- 1D Lagrange elements -----------------------------------------------------------


def _n_gauss(p: int) -> int:
    return math.ceil((2 * p + 1) / 2) + 1


@lru_cache(maxsize=None)
def lagrange_1d(p: int, npts: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Equispaced Lagrange basis on [-1, 1] sampled at Gauss-Legendre points.

    Returns ``(values, derivatives, weights, nodes)``; ``values[i, q]`` is
    basis ``i`` at quadrature point ``q``.
    """
    if p < 1:
        raise ValueError("polynomial degree must be at least 1")
    npts = npts or _n_gauss(p)
    xq, wq = np.polynomial.legendre.leggauss(npts)
    t = np.linspace(-1.0, 1.0, p + 1)
    # coefficients of basis i in the monomial basis: columns of inv(V)
    V = np.vander(t, p + 1, increasing=True)
    C = np.linalg.inv(V)
    Pq = np.vander(xq, p + 1, increasing=True)
    dPq = np.zeros_like(Pq)
    for m in range(1, p + 1):
        dPq[:, m] = m * xq ** (m - 1)
    vals = (Pq @ C).T
    ders = (dPq @ C).T
    return vals, ders, wq, t


def reference_1d_matrices(p: int, npts: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness and mass matrices of the degree-``p`` basis on [-1, 1]."""
    vals, ders, w, _ = lagrange_1d(p, npts)
    K = (ders * w) @ ders.T
    M = (vals * w) @ vals.T
    return K, M


def assemble_1d_hp(breakpoints: Sequence[float] | Mesh, p: int) -> SystemMatrices:
    """Continuous piecewise degree-``p`` elements on a chain of intervals."""
    if isinstance(breakpoints, Mesh):
        if breakpoints.kind != "interval2":
            raise MeshError("1D assembly needs an interval mesh")
        x = np.sort(breakpoints.nodes[:, 0])
    else:
        x = np.asarray(breakpoints, dtype=float)
        make_interval_mesh(x)  # validates ordering
    if p < 1:
        raise ValueError("polynomial degree must be at least 1")
    Kr, Mr = reference_1d_matrices(p)
    _, _, _, t = lagrange_1d(p)
    n_el = len(x) - 1
    n = n_el * p + 1
    rows, cols, av, mv = [], [], [], []
    coords = np.empty(n)
    for e in range(n_el):
        h = x[e + 1] - x[e]
        dofs = np.arange(e * p, e * p + p + 1)
        coords[dofs] = x[e] + (t + 1) * h / 2
        Ae, Me = Kr * (2 / h), Mr * (h / 2)
        for i in range(p + 1):
            for j in range(p + 1):
                rows.append(dofs[i]); cols.append(dofs[j])
                av.append(Ae[i, j]); mv.append(Me[i, j])
    coords[0], coords[-1] = x[0], x[-1]
    A = sp.csr_matrix((av, (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((mv, (rows, cols)), shape=(n, n))
    B = sp.csr_matrix(([1.0, 1.0], ([0, n - 1], [0, n - 1])), shape=(n, n))
    return SystemMatrices(A, M, B, coords[:, None], np.array([0, n - 1]), p, np.arange(0, n, p))


# -- tensor-product quadrilaterals -----------------------------------------------------


def _quad_corners(mesh: Mesh, conn) -> tuple[int, int, int, int, float, float, float, float]:
    """Bottom-left, bottom-right, top-right, top-left ids plus the bounding box."""
    pts = mesh.nodes[conn]
    x0, x1 = pts[:, 0].min(), pts[:, 0].max()
    y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    lookup = {(float(px), float(py)): int(v) for (px, py), v in zip(pts, conn)}
    return (lookup[(x0, y0)], lookup[(x1, y0)], lookup[(x1, y1)], lookup[(x0, y1)], x0, x1, y0, y1)


def assemble_quad_tensor(mesh: Mesh, p: int, quad_order: int | None = None) -> SystemMatrices:
    """Continuous Q^p Lagrange elements on an axis-parallel rectangle mesh.

    ``quad_order`` is the number of Gauss-Legendre points per direction;
    the default ``p + 2`` integrates every entry exactly.
    """
    if mesh.kind != "quad4":
        raise MeshError("tensor assembly needs a quad4 mesh")
    if not 1 <= p <= 6:
        raise ValueError("tensor elements are supported for p = 1..6")
    q = quad_order or p + 2
    if q < p + 1:
        raise ValueError("quadrature order must be at least p + 1")
    Kr, Mr = reference_1d_matrices(p, q)
    _, _, _, t = lagrange_1d(p, q)
    npl = p + 1

    dof_of: dict[tuple, int] = {}
    coords: list[tuple[float, float]] = []

    def dof(key, xy):
        d = dof_of.get(key)
        if d is None:
            d = dof_of[key] = len(coords)
            coords.append(xy)
        return d

    def side_key(u, v, s):
        # s-th interior point walking from u to v, keyed from the smaller id
        return ("e", u, v, s) if u < v else ("e", v, u, p - s)

    rows, cols, av, mv = [], [], [], []
    for el, conn in enumerate(mesh.elements):
        bl, br, tr, tl, x0, x1, y0, y1 = _quad_corners(mesh, conn)
        hx, hy = x1 - x0, y1 - y0
        local = np.empty(npl * npl, dtype=np.int64)
        for j in range(npl):
            for i in range(npl):
                xy = (x0 + (t[i] + 1) * hx / 2, y0 + (t[j] + 1) * hy / 2)
                if i in (0, p) and j in (0, p):
                    key = ("v", {(0, 0): bl, (p, 0): br, (p, p): tr, (0, p): tl}[(i, j)])
                elif j == 0:
                    key = side_key(bl, br, i)
                elif j == p:
                    key = side_key(tl, tr, i)
                elif i == 0:
                    key = side_key(bl, tl, j)
                elif i == p:
                    key = side_key(br, tr, j)
                else:
                    key = ("c", el, i, j)
                if key[0] == "v":
                    xy = tuple(mesh.nodes[key[1]])
                local[j * npl + i] = dof(key, xy)
        Kx, Mx = Kr * (2 / hx), Mr * (hx / 2)
        Ky, My = Kr * (2 / hy), Mr * (hy / 2)
        Ae = np.kron(My, Kx) + np.kron(Ky, Mx)
        Me = np.kron(My, Mx)
        r, c = np.meshgrid(local, local, indexing="ij")
        rows.append(r.ravel()); cols.append(c.ravel())
        av.append(Ae.ravel()); mv.append(Me.ravel())

    n = len(coords)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    A = sp.csr_matrix((np.concatenate(av), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))

    brows, bcols, bv = [], [], []
    bnd: set[int] = set()
    for e in mesh.boundary_edges:
        u, v = e.a, e.b
        L = float(np.hypot(*(mesh.nodes[v] - mesh.nodes[u])))
        ids = [dof_of[("v", u)]] + [dof_of[side_key(u, v, s)] for s in range(1, p)] + [dof_of[("v", v)]]
        Be = Mr * (L / 2)
        bnd.update(ids)
        for i in range(npl):
            for j in range(npl):
                brows.append(ids[i]); bcols.append(ids[j]); bv.append(Be[i, j])
    B = sp.csr_matrix((bv, (brows, bcols)), shape=(n, n))
    vdofs = np.array([dof_of[("v", i)] for i in range(mesh.n_nodes)])
    return SystemMatrices(A, M, B, np.array(coords), np.array(sorted(bnd)), p, vdofs)


def assemble(mesh: Mesh, p: int = 1) -> SystemMatrices:
    """Dispatch on the element kind."""
    if mesh.kind == "tri3":
        if p != 1:
            raise ValueError("triangles are supported with p = 1 only")
        return assemble_p1(mesh)
    if mesh.kind == "quad4":
        return assemble_quad_tensor(mesh, p)
    return assemble_1d_hp(mesh, p)


# -- reduced local system on the reference square --------------------------------------

# Bivariate polynomials as {(i, j): Fraction} meaning sum c * x^i * y^j.


def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (i, j), c in a.items():
        for (k, l), d in b.items():
            out[(i + k, j + l)] = out.get((i + k, j + l), 0) + c * d
    return out


def _pdx(a: dict) -> dict:
    return {(i - 1, j): c * i for (i, j), c in a.items() if i > 0}


def _pdy(a: dict) -> dict:
    return {(i, j - 1): c * j for (i, j), c in a.items() if j > 0}


def _moment(n: int) -> Fraction:
    # integral of x^n over [-1, 1]
    return Fraction(2, n + 1) if n % 2 == 0 else Fraction(0)


def _integrate(a: dict) -> Fraction:
    return sum((c * _moment(i) * _moment(j) for (i, j), c in a.items()), Fraction(0))


def reduced_monomials(p: int) -> list[tuple[int, int]]:
    """Exponents ``(i, j)`` of ``x^i y^j`` spanning Q^{p-1}, y fastest."""
    return [(i, j) for i in range(p) for j in range(p)]


def reduced_quad_local_matrices(p: int) -> tuple[RationalMatrix, RationalMatrix]:
    """Exact ``(S, Mr)`` of the reduced local system for degree ``p``.

    Trial functions are ``(1+x)(1+y) m_r`` and test functions
    ``(1-x)(1-y) m_c`` with monomials ``m`` from :func:`reduced_monomials`;
    ``S[r, c]`` is the gradient pairing, ``Mr[r, c]`` the L2 pairing.  Rows
    follow the trial function, which is the layout of the published 4x4
    matrices for p = 2.
    """
    if p not in (1, 2, 3, 4):
        raise ValueError("reduced matrices are provided for p = 1..4")
    one = Fraction(1)
    b_in = {(0, 0): one, (1, 0): one, (0, 1): one, (1, 1): one}
    b_out = {(0, 0): one, (1, 0): -one, (0, 1): -one, (1, 1): one}
    mons = reduced_monomials(p)
    trial = [_pmul(b_in, {m: one}) for m in mons]
    test = [_pmul(b_out, {m: one}) for m in mons]
    S, Mr = [], []
    for u in trial:
        srow, mrow = [], []
        for v in test:
            vx, vy = _pdx(v), _pdy(v)
            grad = _integrate(_pmul(_pdx(u), vx)) + _integrate(_pmul(_pdy(u), vy))
            srow.append(grad)
            mrow.append(_integrate(_pmul(u, v)))
        S.append(srow)
        Mr.append(mrow)
    return RationalMatrix(S), RationalMatrix(Mr)


# -- export ---------------------------------------------------------------------------


def dump_matrix_market(sys: SystemMatrices, out_dir, k: float | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    mats = {"A": sys.A, "M": sys.M, "B": sys.B}
    if k is not None:
        mats["K"] = system_matrix(sys, k).K
    for name, mat in mats.items():
        path = out / f"{name}.mtx"
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat))
        written.append(path)
    return written
