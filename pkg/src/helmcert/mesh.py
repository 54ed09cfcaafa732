"""Mesh data model, JSON I/O, generators and geometric predicates.

Meshes are conforming triangulations (``tri3``), axis-parallel rectangle
meshes (``quad4``) or interval chains (``interval2``).  A :class:`Mesh` is
validated once on construction and treated as immutable afterwards; the
repair operations build new meshes instead of editing one in place.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EPS_ANGLE = 1e-12

KINDS = {"tri3": 3, "quad4": 4, "interval2": 2}


class MeshError(ValueError):
    """Raised for malformed, degenerate or non-conforming meshes."""


@dataclass(frozen=True)
class Edge:
    """An undirected edge ``(a, b)`` with ``a < b`` and its adjacent elements."""

    a: int
    b: int
    elements: tuple[int, ...]

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)

    @property
    def interior(self) -> bool:
        return len(self.elements) == 2

    @property
    def location(self) -> str:
        return "interior" if self.interior else "boundary"


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class Mesh:
    """Validated mesh with a derived edge table.

    ``nodes`` is an ``(N, dim)`` float array, ``elements`` an ``(E, nv)`` int
    array.  2D elements are reordered counter-clockwise on construction.
    """

    def __init__(self, nodes, elements, kind: str):
        if kind not in KINDS:
            raise MeshError(f"unknown element kind {kind!r}")
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.array(elements, dtype=np.int64)
        nv = KINDS[kind]
        if elements.ndim != 2 or elements.shape[1] != nv:
            raise MeshError(f"{kind} elements need {nv} vertices each")
        dim = 1 if kind == "interval2" else 2
        if nodes.ndim != 2 or nodes.shape[1] != dim:
            raise MeshError(f"{kind} meshes need {dim}-dimensional node coordinates")
        if len(nodes) == 0 or len(elements) == 0:
            raise MeshError("empty mesh")
        if not np.all(np.isfinite(nodes)):
            raise MeshError("non-finite node coordinate")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise MeshError("element references a node id out of range")
        for e, conn in enumerate(elements):
            if len(set(conn.tolist())) != nv:
                raise MeshError(f"element {e} repeats a vertex")
        uniq = np.unique(nodes, axis=0)
        if len(uniq) != len(nodes):
            raise MeshError("duplicate node coordinates")

        self.kind = kind
        self.dim = dim
        self.nodes = nodes
        self.nodes.flags.writeable = False
        if dim == 2:
            elements = self._orient(nodes, elements)
        else:
            swap = nodes[elements[:, 0], 0] > nodes[elements[:, 1], 0]
            elements[swap] = elements[swap][:, ::-1]
            elements = elements[np.argsort(nodes[elements[:, 0], 0], kind="stable")]
        self.elements = elements
        self.elements.flags.writeable = False

        if dim == 2:
            self.edges = self._build_edges()
            self.edge_index = {e.key: i for i, e in enumerate(self.edges)}
            self._check_conforming()
            self._check_connected()
            bnd = set()
            for e in self.edges:
                if not e.interior:
                    bnd.update(e.key)
            self.boundary_nodes = frozenset(bnd)
            nbrs: list[list[int]] = [[] for _ in range(len(nodes))]
            for e in self.edges:
                if e.interior:
                    nbrs[e.a].append(e.b)
                    nbrs[e.b].append(e.a)
            self.interior_neighbors = tuple(tuple(sorted(n)) for n in nbrs)
        else:
            self._check_interval_chain()
            self.edges = []
            self.edge_index = {}
            order = np.argsort(nodes[:, 0])
            self.boundary_nodes = frozenset({int(order[0]), int(order[-1])})
            self.interior_neighbors = tuple(() for _ in range(len(nodes)))

    # -- construction helpers -------------------------------------------------

    def _orient(self, nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
        out = elements.copy()
        scale = float(np.ptp(nodes, axis=0).max()) or 1.0
        for e, conn in enumerate(elements):
            area = _signed_area(nodes[conn])
            if abs(area) <= 1e-14 * scale * scale:
                raise MeshError(f"element {e} has zero area")
            if area < 0:
                out[e] = conn[::-1]
        if self.kind == "quad4":
            for e, conn in enumerate(out):
                p = nodes[conn]
                xs, ys = np.unique(p[:, 0]), np.unique(p[:, 1])
                if len(xs) != 2 or len(ys) != 2:
                    raise MeshError(f"quad element {e} is not an axis-parallel rectangle")
                corners = {(x, y) for x in xs for y in ys}
                if {tuple(q) for q in p.tolist()} != corners:
                    raise MeshError(f"quad element {e} is not an axis-parallel rectangle")
        return out

    def _build_edges(self) -> list[Edge]:
        adj: dict[tuple[int, int], list[int]] = {}
        directed: set[tuple[int, int]] = set()
        for e, conn in enumerate(self.elements.tolist()):
            n = len(conn)
            for i in range(n):
                a, b = conn[i], conn[(i + 1) % n]
                if (a, b) in directed:
                    raise MeshError(f"overlapping elements along edge ({a}, {b})")
                directed.add((a, b))
                adj.setdefault(edge_key(a, b), []).append(e)
        edges = []
        for key in sorted(adj):
            els = adj[key]
            if len(els) > 2:
                raise MeshError(f"non-manifold edge {key} with {len(els)} elements")
            edges.append(Edge(key[0], key[1], tuple(els)))
        return edges

    def _check_conforming(self) -> None:
        pts = self.nodes
        scale = float(np.ptp(pts, axis=0).max()) or 1.0
        tol = 1e-12 * scale
        for e in self.edges:
            p, q = pts[e.a], pts[e.b]
            d = q - p
            L2 = float(d @ d)
            rel = pts - p
            cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
            t = rel @ d / L2
            hit = (np.abs(cross) <= tol * math.sqrt(L2)) & (t > 1e-12) & (t < 1 - 1e-12)
            if np.any(hit):
                z = int(np.flatnonzero(hit)[0])
                raise MeshError(f"hanging node {z} on edge {e.key}")

    def _check_connected(self) -> None:
        n_el = len(self.elements)
        seen = {0}
        stack = [0]
        el_edges: list[list[int]] = [[] for _ in range(n_el)]
        for i, e in enumerate(self.edges):
            for el in e.elements:
                el_edges[el].append(i)
        while stack:
            el = stack.pop()
            for i in el_edges[el]:
                for other in self.edges[i].elements:
                    if other not in seen:
                        seen.add(other)
                        stack.append(other)
        if len(seen) != n_el:
            raise MeshError("elements do not form a connected domain")

    def _check_interval_chain(self) -> None:
        x = self.nodes[:, 0]
        for e, (a, b) in enumerate(self.elements.tolist()):
            if x[a] > x[b]:
                a, b = b, a
            if not x[b] > x[a]:
                raise MeshError(f"interval {e} has zero length")
        spans = sorted((min(x[a], x[b]), max(x[a], x[b])) for a, b in self.elements.tolist())
        for (l0, r0), (l1, r1) in zip(spans, spans[1:]):
            if r0 != l1:
                raise MeshError("intervals do not form a contiguous chain")

    # -- accessors --------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def interior_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.interior]

    @property
    def boundary_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.interior]

    def edge(self, a: int, b: int) -> Edge:
        try:
            return self.edges[self.edge_index[edge_key(a, b)]]
        except KeyError:
            raise MeshError(f"({a}, {b}) is not an edge of the mesh") from None

    def has_interior_edge(self, a: int, b: int) -> bool:
        i = self.edge_index.get(edge_key(a, b))
        return i is not None and self.edges[i].interior

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edge_index)

    def with_elements(self, nodes, elements) -> "Mesh":
        return Mesh(nodes, elements, self.kind)

    def __repr__(self) -> str:
        return f"Mesh(kind={self.kind!r}, nodes={self.n_nodes}, elements={self.n_elements})"


# -- I/O ----------------------------------------------------------------------


def mesh_to_dict(mesh: Mesh) -> dict:
    return {
        "dim": mesh.dim,
        "nodes": mesh.nodes.tolist(),
        "elements": {"kind": mesh.kind, "connectivity": mesh.elements.tolist()},
    }


def mesh_from_dict(data: dict) -> Mesh:
    try:
        dim = int(data["dim"])
        nodes = data["nodes"]
        kind = data["elements"]["kind"]
        conn = data["elements"]["connectivity"]
    except (KeyError, TypeError) as exc:
        raise MeshError(f"missing mesh field: {exc}") from None
    if dim not in (1, 2):
        raise MeshError(f"unsupported dim {dim}")
    if (dim == 1) != (kind == "interval2"):
        raise MeshError(f"element kind {kind!r} does not match dim {dim}")
    if any(len(p) != dim for p in nodes):
        raise MeshError(f"node coordinates must have length {dim}")
    if any(not float(i).is_integer() or isinstance(i, bool) for c in conn for i in c):
        raise MeshError("connectivity must hold integer node ids")
    return Mesh(nodes, conn, kind)


def load_mesh(path) -> Mesh:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return mesh_from_dict(data)


def save_mesh(mesh: Mesh, path) -> None:
    # json writes floats with repr(), which round-trips IEEE doubles exactly
    Path(path).write_text(json.dumps(mesh_to_dict(mesh)) + "\n", encoding="utf-8")


# -- geometric predicates -------------------------------------------------------


def _angle(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
    """Angle at ``p`` in the triangle ``p, q, r``."""
    u, v = q - p, r - p
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(u @ v))


def triangle_angles(pts: np.ndarray) -> tuple[float, float, float]:
    a, b, c = pts
    return _angle(a, b, c), _angle(b, c, a), _angle(c, a, b)


def _cot(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
    u, v = q - p, r - p
    cross = abs(u[0] * v[1] - u[1] * v[0])
    if cross == 0.0:
        raise MeshError("degenerate triangle")
    return float(u @ v) / cross


def _opposite_vertices(mesh: Mesh, a: int, b: int) -> tuple[int, int]:
    if mesh.kind != "tri3":
        raise MeshError("angle predicates need a triangular mesh")
    e = mesh.edge(a, b)
    if not e.interior:
        raise MeshError(f"edge {e.key} lies on the boundary")
    opp = []
    for el in e.elements:
        (c,) = set(mesh.elements[el].tolist()) - {e.a, e.b}
        opp.append(c)
    return opp[0], opp[1]


def opposite_angles(mesh: Mesh, edge: Sequence[int]) -> tuple[float, float, float]:
    """Angles opposite an interior edge in both adjacent triangles, and their sum."""
    a, b = edge
    c, d = _opposite_vertices(mesh, a, b)
    pa, pb = mesh.nodes[a], mesh.nodes[b]
    am = _angle(mesh.nodes[c], pa, pb)
    ap = _angle(mesh.nodes[d], pa, pb)
    return am, ap, am + ap


def cot_sum(mesh: Mesh, edge: Sequence[int]) -> float:
    a, b = edge
    c, d = _opposite_vertices(mesh, a, b)
    pa, pb = mesh.nodes[a], mesh.nodes[b]
    return _cot(mesh.nodes[c], pa, pb) + _cot(mesh.nodes[d], pa, pb)


def weakly_acute(mesh: Mesh, edge: Sequence[int], eps: float = EPS_ANGLE) -> bool:
    """True iff the opposite angles of ``edge`` sum to at most pi.

    Evaluated as ``cot(a-) + cot(a+) >= -eps``; for angles in (0, pi) this
    is equivalent to ``a- + a+ <= pi``.
    """
    return bool(cot_sum(mesh, edge) >= -eps)


def transmission_degree(mesh: Mesh, z_prime: int, n1: Iterable[int]) -> int:
    """Number of interior-edge neighbours of ``z_prime`` outside ``n1``."""
    n1 = n1 if isinstance(n1, (set, frozenset)) else set(n1)
    if z_prime not in n1:
        raise ValueError(f"node {z_prime} is not in the given node set")
    return sum(1 for z in mesh.interior_neighbors[z_prime] if z not in n1)


def min_angle_quality(mesh: Mesh, elements: Iterable[int] | None = None) -> float:
    if mesh.kind != "tri3":
        raise MeshError("min angle quality needs a triangular mesh")
    ids = range(mesh.n_elements) if elements is None else list(elements)
    if len(ids) == 0:
        raise MeshError("empty mesh")
    return min(min(triangle_angles(mesh.nodes[mesh.elements[e]])) for e in ids)


def element_areas(mesh: Mesh) -> np.ndarray:
    return np.array([_signed_area(mesh.nodes[c]) for c in mesh.elements])


# -- generators -----------------------------------------------------------------


def make_structured_tri_mesh(nx: int, ny: int, pattern: str = "diagonal") -> Mesh:
    """Triangulation of the unit square on an ``nx`` by ``ny`` grid.

    ``diagonal`` splits each cell along its (i, j)-(i+1, j+1) diagonal;
    ``crisscross`` adds a centre node per cell and cuts the cell into four.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    nodes = [(x, y) for y in ys for x in xs]

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if pattern == "diagonal":
                tris += [[v00, v10, v11], [v00, v11, v01]]
            elif pattern == "crisscross":
                c = len(nodes)
                nodes.append(((xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2))
                tris += [[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
            else:
                raise ValueError(f"unknown pattern {pattern!r}")
    return Mesh(nodes, tris, "tri3")


# Node order of the T_alpha mesh: corners P1..P4 on the boundary, then the
# interior ring P1..P4 and the centre P5.
TALPHA_CORNERS = (0, 1, 2, 3)
TALPHA_RING = (4, 5, 6, 7)
TALPHA_CENTER = 8


def make_talpha(alpha: float) -> Mesh:
    """The 9-node, 12-triangle mesh of (-1, 1)^2 with an inner diamond of radius ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    a = float(alpha)
    nodes = [(-1, -1), (1, -1), (1, 1), (-1, 1), (-a, 0), (0, -a), (a, 0), (0, a), (0, 0)]
    tris = [
        [0, 1, 5], [1, 2, 6], [2, 3, 7], [3, 0, 4],
        [0, 5, 4], [1, 6, 5], [2, 7, 6], [3, 4, 7],
        [8, 4, 5], [8, 5, 6], [8, 6, 7], [8, 7, 4],
    ]
    return Mesh(nodes, tris, "tri3")


def make_tensor_quad_mesh(xs: Sequence[float], ys: Sequence[float]) -> Mesh:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2:
        raise ValueError("need at least two coordinates per direction")
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise ValueError("coordinate lists must be strictly increasing")
    nx = len(xs)
    nodes = [(x, y) for y in ys for x in xs]
    quads = []
    for j in range(len(ys) - 1):
        for i in range(nx - 1):
            v = j * nx + i
            quads.append([v, v + 1, v + 1 + nx, v + nx])
    return Mesh(nodes, quads, "quad4")


def make_interval_mesh(breakpoints: Sequence[float]) -> Mesh:
    x = np.asarray(breakpoints, dtype=float)
    if len(x) < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("breakpoints must be strictly increasing, at least two")
    return Mesh(x[:, None], [[i, i + 1] for i in range(len(x) - 1)], "interval2")


def make_ring_mesh(n: int = 6, radii: Sequence[float] = (0.3, 0.55, 0.8, 1.0)) -> Mesh:
    """Nested n-gon rings around a centre node, built to stall the marching check.

    Rings 0 and 2 sit at angles ``i*theta``, ring 1 at ``(i+1/2)*theta``, so
    every ring-1 node touches exactly two ring-0 and two ring-2 nodes.  The
    outer boundary carries ``2n`` nodes; those aligned with ring 2 have a
    single interior neighbour, so the marching reaches ring 2 and then
    stops with ring 1, ring 0 and the centre undecided.
    """
    r0, r1, r2, r3 = radii
    th = 2 * math.pi / n
    nodes = [(0.0, 0.0)]

    def ring(r, off):
        start = len(nodes)
        for i in range(n):
            t = (i + off) * th
            nodes.append((r * math.cos(t), r * math.sin(t)))
        return list(range(start, start + n))

    L0 = ring(r0, 0.0)
    L1 = ring(r1, 0.5)
    L2 = ring(r2, 0.0)
    A = ring(r3, 0.0)
    B = ring(r3, 0.5)
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append([0, L0[i], L0[j]])
        tris += [[L0[i], L1[i], L0[j]], [L1[i - 1], L0[i], L1[i]]]
        tris += [[L2[i], L1[i], L2[j]], [L1[i - 1], L1[i], L2[i]]]
        tris += [[L2[i], A[i], B[i]], [L2[i], B[i], L2[j]], [B[i], A[j], L2[j]]]
    return Mesh(nodes, tris, "tri3")


def jitter_mesh(mesh: Mesh, amount: float, rng: np.random.Generator, max_tries: int = 50) -> Mesh:
    """Randomly displace interior nodes by up to ``amount`` (per coordinate).

    Retries with halved amplitude when a displacement inverts an element.
    """
    nodes = mesh.nodes.copy()
    interior = np.array(sorted(set(range(mesh.n_nodes)) - mesh.boundary_nodes), dtype=int)
    amp = amount
    for _ in range(max_tries):
        trial = nodes.copy()
        trial[interior] += rng.uniform(-amp, amp, size=(len(interior), 2))
        areas = [_signed_area(trial[c]) for c in mesh.elements]
        if min(areas) > 0:
            return Mesh(trial, mesh.elements, mesh.kind)
        amp /= 2
    return mesh


def relabel(mesh: Mesh, perm: Sequence[int]) -> Mesh:
    """Mesh with node ``i`` renamed to ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(mesh.n_nodes)):
        raise ValueError("permutation must be a bijection on node ids")
    nodes = np.empty_like(mesh.nodes)
    nodes[perm] = mesh.nodes
    return Mesh(nodes, perm[mesh.elements], mesh.kind)
