"""Marching of the zeros: a combinatorial certificate that the P1 system is regular.

Starting from nodes where every homogeneous solution is known to vanish
(by default the boundary nodes), a node ``z`` is added whenever some known
node ``z'`` has ``z`` as its only undecided interior-edge neighbour.  If
every node gets added the mesh is *certified*; otherwise the run is
*critical* and the undecided remainder is reported.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .mesh import Mesh, edge_key, relabel, transmission_degree, weakly_acute

CERTIFIED = "certified"
CRITICAL = "critical"


@dataclass(frozen=True)
class Step:
    step: int
    z: int
    z_prime: int
    edge: tuple[int, int]

    def to_json(self) -> dict:
        return {"step": self.step, "z": self.z, "z_prime": self.z_prime, "edge": list(self.edge)}


@dataclass
class MotzState:
    n_test: frozenset[int]
    n_dof: frozenset[int]
    trans_edges: tuple[tuple[int, int], ...]
    trace: list[Step]
    verdict: str
    n_test_init: frozenset[int] = field(default_factory=frozenset)

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "steps": len(self.trace),
            "residual_dof": sorted(self.n_dof),
            "trans_edges": [list(e) for e in self.trans_edges],
        }


def _initial(mesh: Mesh, n_test_init: Iterable[int] | None) -> set[int]:
    if mesh.kind != "tri3":
        raise ValueError("the marching check is defined for triangular meshes")
    init = set(mesh.boundary_nodes) if n_test_init is None else set(int(z) for z in n_test_init)
    if not init <= set(range(mesh.n_nodes)):
        raise ValueError("initial test set contains ids that are not mesh nodes")
    return init


def check_lducp_pair(mesh: Mesh, z: int, z_prime: int, n_test: Iterable[int]) -> bool:
    """Can the zero at ``z_prime`` be propagated to ``z``?

    The weakly acute condition on ``[z, z_prime]`` is not part of this test;
    it is restored afterwards by bisection.
    """
    n_test = n_test if isinstance(n_test, (set, frozenset)) else set(n_test)
    if z in n_test or z_prime not in n_test:
        raise ValueError("z must be undecided and z_prime known")
    return mesh.has_interior_edge(z, z_prime) and transmission_degree(mesh, z_prime, n_test) == 1


def motz(mesh: Mesh, n_test_init: Iterable[int] | None = None, strict: bool = False) -> MotzState:
    """Run the marching with a dof-neighbour counter per known node.

    The pivot is always the smallest-id known node with exactly one
    undecided neighbour, so traces are reproducible.  With ``strict`` a
    pivot whose edge violates the weakly acute condition is never used.
    """
    init = _initial(mesh, n_test_init)
    nbrs = mesh.interior_neighbors
    in_test = [False] * mesh.n_nodes
    for z in init:
        in_test[z] = True
    n_dof_count = mesh.n_nodes - len(init)
    count = [0] * mesh.n_nodes
    heap: list[int] = []
    for z in init:
        count[z] = sum(1 for y in nbrs[z] if not in_test[y])
        if count[z] == 1:
            heap.append(z)
    heapq.heapify(heap)

    trace: list[Step] = []
    while n_dof_count and heap:
        zp = heapq.heappop(heap)
        if count[zp] != 1:
            continue
        z = next(y for y in nbrs[zp] if not in_test[y])
        assert sum(1 for y in nbrs[zp] if not in_test[y]) == 1, "pivot lost its frontier status"
        if strict and not weakly_acute(mesh, (z, zp)):
            continue
        in_test[z] = True
        n_dof_count -= 1
        trace.append(Step(len(trace) + 1, z, zp, edge_key(z, zp)))
        count[zp] = 0
        c = 0
        for y in nbrs[z]:
            if in_test[y]:
                count[y] -= 1
                if count[y] == 1:
                    heapq.heappush(heap, y)
            else:
                c += 1
        count[z] = c
        if c == 1:
            heapq.heappush(heap, z)
    return _finish(mesh, init, in_test, trace)


def motz_reference(mesh: Mesh, n_test_init: Iterable[int] | None = None, strict: bool = False) -> MotzState:
    """Plain rescanning implementation with the same selection rule."""
    init = _initial(mesh, n_test_init)
    n_test = set(init)
    trace: list[Step] = []
    banned: set[int] = set()
    while len(n_test) < mesh.n_nodes:
        pick = None
        for zp in sorted(n_test - banned):
            if transmission_degree(mesh, zp, n_test) == 1:
                z = next(y for y in mesh.interior_neighbors[zp] if y not in n_test)
                if strict and not weakly_acute(mesh, (z, zp)):
                    banned.add(zp)
                    continue
                pick = (z, zp)
                break
        if pick is None:
            break
        z, zp = pick
        n_test.add(z)
        trace.append(Step(len(trace) + 1, z, zp, edge_key(z, zp)))
    in_test = [i in n_test for i in range(mesh.n_nodes)]
    return _finish(mesh, init, in_test, trace)


def _finish(mesh: Mesh, init: set[int], in_test: list[bool], trace: list[Step]) -> MotzState:
    n_test = frozenset(i for i, t in enumerate(in_test) if t)
    n_dof = frozenset(range(mesh.n_nodes)) - n_test
    return MotzState(
        n_test=n_test,
        n_dof=n_dof,
        trans_edges=tuple(s.edge for s in trace),
        trace=trace,
        verdict=CERTIFIED if not n_dof else CRITICAL,
        n_test_init=frozenset(init),
    )


def residual_points(mesh: Mesh, state: MotzState) -> frozenset[tuple[float, float]]:
    return frozenset(tuple(mesh.nodes[z].tolist()) for z in state.n_dof)


def motz_invariant_under_relabel(mesh: Mesh, perm: Sequence[int]) -> bool:
    """Same verdict and same residual point set after renaming the nodes."""
    other = relabel(mesh, perm)
    s0, s1 = motz(mesh), motz(other)
    return s0.verdict == s1.verdict and residual_points(mesh, s0) == residual_points(other, s1)


# -- trace files ------------------------------------------------------------------


def write_trace(state: MotzState, path) -> None:
    lines = [json.dumps(s.to_json(), sort_keys=True) for s in state.trace]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_trace(path) -> list[Step]:
    steps = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            steps.append(Step(int(rec["step"]), int(rec["z"]), int(rec["z_prime"]), edge_key(*rec["edge"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{n}: bad trace record ({exc})") from None
    return steps
