"""Deterministic SVG frames of a marching trace."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .mesh import Mesh, edge_key, transmission_degree
from .motz import Step

SIZE = 480
MARGIN = 24
TEST_FILL = "#f28e2b"
DOF_FILL = "#d62728"
EDGE_STROKE = "#7f7f7f"
TRANS_STROKE = "#1f77b4"


def validate_trace(mesh: Mesh, steps: Sequence[Step], n_test_init=None) -> None:
    """Replay the trace and raise ``ValueError`` on the first inconsistent step."""
    known = set(mesh.boundary_nodes if n_test_init is None else n_test_init)
    for i, s in enumerate(steps, 1):
        if s.step != i:
            raise ValueError(f"trace step {s.step} out of order (expected {i})")
        if not (0 <= s.z < mesh.n_nodes and 0 <= s.z_prime < mesh.n_nodes):
            raise ValueError(f"step {i}: node id outside the mesh")
        if s.z in known or s.z_prime not in known:
            raise ValueError(f"step {i}: node {s.z} already known or pivot {s.z_prime} undecided")
        if s.edge != edge_key(s.z, s.z_prime) or not mesh.has_interior_edge(s.z, s.z_prime):
            raise ValueError(f"step {i}: {s.edge} is not the interior edge between pivot and node")
        if transmission_degree(mesh, s.z_prime, known) != 1:
            raise ValueError(f"step {i}: pivot {s.z_prime} has more than one undecided neighbour")
        known.add(s.z)


def frame_steps(n_steps: int, every: int) -> list[int]:
    if every < 1:
        raise ValueError("--every must be at least 1")
    picks = set(range(0, n_steps + 1, every)) | {0, n_steps}
    return sorted(picks)


def _fmt(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def frame_svg(mesh: Mesh, steps: Sequence[Step], upto: int, n_test_init=None) -> str:
    known = set(mesh.boundary_nodes if n_test_init is None else n_test_init)
    known |= {s.z for s in steps[:upto]}
    trans = {s.edge for s in steps[:upto]}
    P = mesh.nodes
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (SIZE - 2 * MARGIN) / span

    def xy(i):
        x = MARGIN + (P[i, 0] - lo[0]) * scale
        y = SIZE - MARGIN - (P[i, 1] - lo[1]) * scale
        return _fmt(x), _fmt(y)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>step {upto} of {len(steps)}</title>",
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        '<g stroke-width="1">',
    ]
    for e in sorted(mesh.edge_set()):
        (x1, y1), (x2, y2) = xy(e[0]), xy(e[1])
        if e in trans:
            style = f'stroke="{TRANS_STROKE}" stroke-width="2.5" stroke-dasharray="6 4"'
        else:
            style = f'stroke="{EDGE_STROKE}"'
        out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" {style}/>')
    out.append("</g>")
    out.append('<g stroke="black" stroke-width="0.75">')
    for i in range(mesh.n_nodes):
        x, y = xy(i)
        fill = TEST_FILL if i in known else DOF_FILL
        cls = "test" if i in known else "dof"
        out.append(f'<circle class="{cls}" cx="{x}" cy="{y}" r="5" fill="{fill}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trace(mesh: Mesh, steps: Sequence[Step], out_dir, every: int = 1, n_test_init=None) -> list[Path]:
    """Write ``frame_XXXX.svg`` for step 0, every ``every``-th step and the last step."""
    if mesh.kind != "tri3":
        raise ValueError("rendering needs a triangular mesh")
    validate_trace(mesh, steps, n_test_init)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in frame_steps(len(steps), every):
        path = out / f"frame_{s:04d}.svg"
        path.write_text(frame_svg(mesh, steps, s, n_test_init), encoding="utf-8")
        paths.append(path)
    return paths
