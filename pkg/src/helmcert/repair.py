"""Mesh repair: bisection of transmission edges and marching-driven edge flips."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .mesh import Mesh, MeshError, edge_key, min_angle_quality, triangle_angles, weakly_acute
from .motz import MotzState, motz

log = logging.getLogger(__name__)

SCORE_TIE = 1e-12


class RepairError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlipCandidate:
    removed_edge: tuple[int, int]
    inserted_edge: tuple[int, int]
    score: float
    z: int
    z_tilde: int

    def to_json(self) -> dict:
        return {
            "removed_edge": list(self.removed_edge),
            "inserted_edge": list(self.inserted_edge),
            "score": self.score,
        }


def bisect_edge(mesh: Mesh, edge) -> Mesh:
    """Split an interior edge at its midpoint and both adjacent triangles with it.

    The midpoint gets the next free node id; each parent triangle keeps its
    slot for one child and the other child is appended.
    """
    e = mesh.edge(*edge)
    if not e.interior:
        raise MeshError(f"edge {e.key} lies on the boundary")
    m = mesh.n_nodes
    nodes = np.vstack([mesh.nodes, (mesh.nodes[e.a] + mesh.nodes[e.b]) / 2])
    tris = mesh.elements.tolist()
    for el in e.elements:
        conn = tris[el]
        # rotate so the split edge comes first: (a, b, c) counter-clockwise
        while {conn[0], conn[1]} != {e.a, e.b}:
            conn = conn[1:] + conn[:1]
        a, b, c = conn
        tris[el] = [a, m, c]
        tris.append([m, b, c])
    return mesh.with_elements(nodes, tris)


def _check_disjoint_triangles(mesh: Mesh, edges: list[tuple[int, int]]) -> None:
    owner: dict[int, tuple[int, int]] = {}
    for key in edges:
        e = mesh.edge(*key)
        if not e.interior:
            raise MeshError(f"transmission edge {e.key} is not interior")
        for el in e.elements:
            if el in owner:
                raise RepairError(f"transmission edges {owner[el]} and {e.key} share triangle {el}")
            owner[el] = e.key


def correct_angle_condition(mesh: Mesh, trans_edges: Iterable, log_records: list | None = None) -> Mesh:
    """Bisect every transmission edge until all its pieces are weakly acute.

    At most one piece of a bisected edge can still violate the condition,
    so each edge is followed along a single chain of bisections, capped at
    ``ceil(pi / smallest angle) + 4`` steps.
    """
    edges = [edge_key(*e) for e in trans_edges]
    _check_disjoint_triangles(mesh, edges)
    if mesh.n_elements == 0:
        return mesh
    cap = math.ceil(math.pi / min_angle_quality(mesh)) + 4
    for key in edges:
        stack = [key]
        done = 0
        while stack:
            cur = stack.pop()
            if weakly_acute(mesh, cur):
                continue
            if done >= cap:
                raise RepairError(f"edge {key} still violates the angle condition after {cap} bisections")
            m = mesh.n_nodes
            mesh = bisect_edge(mesh, cur)
            done += 1
            if log_records is not None:
                log_records.append({"action": "bisect", "edge": list(cur), "midpoint": m, "origin": list(key)})
            stack += [edge_key(cur[0], m), edge_key(m, cur[1])]
    return mesh


# -- flips ----------------------------------------------------------------------


def _tri_with(mesh: Mesh, el: int) -> frozenset[int]:
    return frozenset(mesh.elements[el].tolist())


def _segments_cross(p, q, r, s) -> bool:
    """Proper intersection of segments pq and rs (endpoints excluded)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p, q, r), orient(p, q, s)
    d3, d4 = orient(r, s, p), orient(r, s, q)
    return d1 * d2 < 0 and d3 * d4 < 0


def _flip_triangles(z: int, z1: int, z2: int, zt: int) -> tuple[list[int], list[int]]:
    return [z, z1, zt], [z, zt, z2]


def candidate_flips(mesh: Mesh, state: MotzState, global_score: bool = False) -> list[FlipCandidate]:
    """Edge flips that hand a known node a new undecided neighbour.

    For an undecided node ``z`` with exactly two known neighbours ``z1, z2``
    sharing exactly one known neighbour ``z~``, the edge ``[z1, z2]`` is
    replaced by ``[z, z~]`` when the surrounding quadrilateral is strictly
    convex.
    """
    if state.certified:
        log.warning("candidate_flips called on a certified state; nothing to flip")
        return []
    test = state.n_test
    nbrs = mesh.interior_neighbors
    out = []
    for z in sorted(state.n_dof):
        known = [y for y in nbrs[z] if y in test]
        if len(known) != 2:
            continue
        z1, z2 = known
        common = set(nbrs[z1]) & set(nbrs[z2]) & test
        if len(common) != 1:
            continue
        (zt,) = common
        if not mesh.has_interior_edge(z1, z2):
            continue
        e = mesh.edge(z1, z2)
        if {_tri_with(mesh, el) for el in e.elements} != {frozenset((z, z1, z2)), frozenset((zt, z1, z2))}:
            continue
        P = mesh.nodes
        if not _segments_cross(P[z], P[zt], P[z1], P[z2]):
            continue
        t1, t2 = _flip_triangles(z, z1, z2, zt)
        if global_score:
            score = min_angle_quality(apply_flip(mesh, FlipCandidate(e.key, edge_key(z, zt), 0.0, z, zt)))
        else:
            score = min(min(triangle_angles(P[t1])), min(triangle_angles(P[t2])))
        out.append(FlipCandidate(e.key, edge_key(z, zt), float(score), z, zt))
    return out


def apply_flip(mesh: Mesh, c: FlipCandidate) -> Mesh:
    z1, z2 = c.removed_edge
    if not mesh.has_interior_edge(z1, z2):
        raise RepairError(f"stale flip: {c.removed_edge} is not an interior edge")
    e = mesh.edge(z1, z2)
    want = {frozenset((c.z, z1, z2)), frozenset((c.z_tilde, z1, z2))}
    if {_tri_with(mesh, el) for el in e.elements} != want:
        raise RepairError(f"stale flip: triangles around {c.removed_edge} changed")
    tris = mesh.elements.tolist()
    t1, t2 = _flip_triangles(c.z, z1, z2, c.z_tilde)
    el1, el2 = sorted(e.elements)
    tris[el1], tris[el2] = t1, t2
    return mesh.with_elements(mesh.nodes, tris)


def _best(cands: list[FlipCandidate]) -> FlipCandidate:
    top = max(c.score for c in cands)
    tied = [c for c in cands if c.score >= top - SCORE_TIE]
    return min(tied, key=lambda c: c.removed_edge)


def motz_flip(
    mesh: Mesh,
    state: MotzState | None = None,
    paper_faithful: bool = False,
    global_score: bool = False,
    log_records: list | None = None,
) -> tuple[Mesh, MotzState]:
    """Flip edges at the undecided front until the marching certifies.

    After every flip the marching restarts from the boundary nodes, unless
    ``paper_faithful`` asks to continue from the grown known set.  Stops
    critical when no candidate is left, an edge set repeats, or more flips
    than interior edges have been made.
    """
    state = state if state is not None else motz(mesh)
    if state.certified:
        raise ValueError("motz_flip needs a critical marching state")
    seen = {mesh.edge_set()}
    budget = len(mesh.interior_edges)
    flips = 0
    while not state.certified:
        cands = candidate_flips(mesh, state, global_score)
        if not cands:
            log.info("no flip candidates left; %d nodes undecided", len(state.n_dof))
            if log_records is not None:
                log_records.append({"action": "stop", "reason": "no candidates", "residual_dof": sorted(state.n_dof)})
            break
        best = _best(cands)
        mesh = apply_flip(mesh, best)
        flips += 1
        if log_records is not None:
            log_records.append({"action": "flip", **best.to_json(), "n_candidates": len(cands)})
        if mesh.edge_set() in seen or flips > budget:
            log.info("flip cycle or budget exhausted after %d flips", flips)
            if log_records is not None:
                log_records.append({"action": "stop", "reason": "cycle or budget", "flips": flips})
            state = motz(mesh)
            break
        seen.add(mesh.edge_set())
        state = motz(mesh, state.n_test) if paper_faithful else motz(mesh)
    return mesh, state
