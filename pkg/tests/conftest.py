from __future__ import annotations

import numpy as np
import pytest

from helmcert.mesh import (
    Mesh,
    element_areas,
    jitter_mesh,
    make_ring_mesh,
    make_structured_tri_mesh,
    make_talpha,
    weakly_acute,
)
from helmcert.motz import motz

# one line per acceptance criterion, printed in the terminal summary
GATE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not GATE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(GATE_LINES):
        terminalreporter.write_line(GATE_LINES[n])


def certified_suite(n: int = 30, seed: int = 0) -> list[Mesh]:
    """Structured and jittered triangulations that the marching certifies."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        pattern = "diagonal" if len(out) % 2 == 0 else "crisscross"
        nx, ny = (int(v) for v in rng.integers(2, 6, size=2))
        mesh = make_structured_tri_mesh(nx, ny, pattern)
        if len(out) % 3:
            mesh = jitter_mesh(mesh, 0.3 / max(nx, ny), rng)
        if motz(mesh).certified:
            out.append(mesh)
    return out


def induce_obtuse(mesh: Mesh) -> Mesh | None:
    """Pull the vertices opposite a transmission edge towards its midpoint.

    The connectivity, and with it the marching verdict, is unchanged; only
    the geometry is bent until that edge violates the angle condition.
    """
    state = motz(mesh)
    interior = set(range(mesh.n_nodes)) - mesh.boundary_nodes
    for key in state.trans_edges:
        e = mesh.edge(*key)
        opp = [(set(mesh.elements[el].tolist()) - set(key)).pop() for el in e.elements]
        movable = [v for v in opp if v in interior]
        if not movable:
            continue
        mid = (mesh.nodes[e.a] + mesh.nodes[e.b]) / 2
        for shrink in (0.5, 0.35, 0.2):
            nodes = mesh.nodes.copy()
            for v in movable:
                nodes[v] = mid + shrink * (nodes[v] - mid)
            try:
                bent = Mesh(nodes, mesh.elements, mesh.kind)
            except ValueError:
                continue
            if element_areas(bent).min() > 0 and not weakly_acute(bent, key):
                return bent
    return None


def kite_mesh(excess: float = 0.2) -> Mesh:
    """Two triangles on a shared edge whose opposite angles sum to pi + excess."""
    half = (np.pi + excess) / 2
    h = 1.0 / np.tan(half / 2)
    nodes = [(-1.0, 0.0), (1.0, 0.0), (0.0, h), (0.0, -h)]
    return Mesh(nodes, [[0, 1, 2], [1, 0, 3]], "tri3")


@pytest.fixture(scope="session")
def suite() -> list[Mesh]:
    return certified_suite()


@pytest.fixture(scope="session")
def talpha() -> Mesh:
    return make_talpha(0.4)


@pytest.fixture(scope="session")
def ring() -> Mesh:
    return make_ring_mesh()
