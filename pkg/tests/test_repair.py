from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import induce_obtuse, kite_mesh
from helmcert.mesh import (
    Mesh,
    MeshError,
    edge_key,
    element_areas,
    make_structured_tri_mesh,
    min_angle_quality,
    opposite_angles,
    transmission_degree,
    triangle_angles,
    weakly_acute,
)
from helmcert.motz import motz
from helmcert.repair import (
    FlipCandidate,
    RepairError,
    apply_flip,
    bisect_edge,
    candidate_flips,
    correct_angle_condition,
    motz_flip,
)


def square():
    return Mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [[0, 1, 2], [0, 2, 3]], "tri3")


def test_bisect_two_triangles():
    m = bisect_edge(square(), (0, 2))
    assert (m.n_nodes, m.n_elements) == (5, 4)
    assert np.allclose(m.nodes[4], (0.5, 0.5))
    assert np.allclose(element_areas(m), 0.25)
    with pytest.raises(MeshError):
        bisect_edge(square(), (0, 1))


def test_bisect_lineage_angles_shrink():
    m = kite_mesh(0.6)
    key = (0, 1)
    before = opposite_angles(m, key)[2]
    m = bisect_edge(m, key)
    after = max(opposite_angles(m, e)[2] for e in [(0, 4), (1, 4)])
    assert after < before


def test_correct_angle_unchanged_when_acute():
    m = make_structured_tri_mesh(3, 3, "crisscross")
    s = motz(m)
    assert correct_angle_condition(m, s.trans_edges) is m


def test_correct_angle_kite():
    m = kite_mesh(0.2)
    assert not weakly_acute(m, (0, 1))
    log = []
    fixed = correct_angle_condition(m, [(0, 1)], log)
    assert len(log) >= 1
    cap = math.ceil(math.pi / min_angle_quality(m)) + 4
    assert len(log) <= cap
    line = sorted({0, 1} | {r["midpoint"] for r in log}, key=lambda i: fixed.nodes[i, 0])
    assert all(weakly_acute(fixed, (a, b)) for a, b in zip(line, line[1:]))


def test_correct_angle_shared_triangle_rejected():
    m = square()
    m = bisect_edge(m, (0, 2))
    with pytest.raises(RepairError, match="share"):
        correct_angle_condition(m, [(0, 4), (1, 4)])


def test_bisection_keeps_certification(suite):
    n = 0
    for mesh in suite:
        bent = induce_obtuse(mesh)
        if bent is None:
            continue
        n += 1
        fixed = correct_angle_condition(bent, motz(bent).trans_edges)
        assert motz(fixed).certified
        assert element_areas(fixed).min() > 0
    assert n >= 20


def test_no_candidates_on_talpha(talpha):
    assert candidate_flips(talpha, motz(talpha)) == []
    m, s = motz_flip(talpha)
    assert not s.certified and m is talpha


def test_ring_flips_to_certified(ring):
    state = motz(ring)
    cands = candidate_flips(ring, state)
    assert len(cands) == 6
    assert len({round(c.score, 12) for c in cands}) == 1
    for c in cands:
        t1, t2 = [c.z, c.removed_edge[0], c.z_tilde], [c.z, c.z_tilde, c.removed_edge[1]]
        assert c.score == pytest.approx(min(min(triangle_angles(ring.nodes[t])) for t in (t1, t2)))
    log = []
    m, s = motz_flip(ring, state, log_records=log)
    assert s.certified and sum(r["action"] == "flip" for r in log) >= 1
    assert m.n_nodes == ring.n_nodes and m.n_elements == ring.n_elements


def test_ring_resume_and_global_score(ring):
    _, s1 = motz_flip(ring, paper_faithful=True)
    _, s2 = motz_flip(ring, global_score=True)
    assert s1.certified and s2.certified


def test_flip_degree_effect_and_involution(ring):
    state = motz(ring)
    c = candidate_flips(ring, state)[0]
    m = apply_flip(ring, c)
    assert transmission_degree(m, c.z_tilde, state.n_test) == transmission_degree(ring, c.z_tilde, state.n_test) + 1
    back = FlipCandidate(edge_key(c.z, c.z_tilde), c.removed_edge, 0.0, c.removed_edge[0], c.removed_edge[1])
    assert apply_flip(m, back).edge_set() == ring.edge_set()
    with pytest.raises(RepairError, match="stale"):
        apply_flip(m, c)


def test_flip_rejects_certified():
    m = make_structured_tri_mesh(2, 2)
    with pytest.raises(ValueError):
        motz_flip(m)
    assert candidate_flips(m, motz(m)) == []


def test_convexity_predicate():
    from helmcert.repair import _segments_cross

    z1, z2 = (0.0, 0.0), (2.0, 0.0)
    assert _segments_cross((1, -1), (1, 1), z1, z2)
    # dart: the diagonal [z, z~] misses [z1, z2], so the quad is not convex
    assert not _segments_cross((1, 0.3), (1, 1.5), z1, z2)
    # degenerate: z~ on the line through z1 and z2
    assert not _segments_cross((1, -1), (2, 0), z1, z2)
