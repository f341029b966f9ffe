import itertools
import json

import networkx as nx
import pytest

from orbital_forge.amalgam import SIDE_A, SIDE_P, VertexId
from orbital_forge.decomposition import (
    block_cut_tree,
    classify_ends,
    classify_tree_automorphism,
    cut_vertices,
    induced_digraph,
    lobes,
    quasi_isometry_check,
)
from orbital_forge.errors import InputError, PreconditionError, UnresolvedError
from orbital_forge.graphengine import LobeGraph, OrbitalHandle, iter_tree_ball, tree_distance
from orbital_forge.permcore import FiniteDigraph


def tagged_lobes(ball):
    """Lobes read from the construction's tags, independent of networkx."""
    return {members for members, full in ball.lobes.values() if full}


def test_ex1_lobes_at_radius_two(ex1):
    ball = LobeGraph(ex1).ball(2)
    ls = lobes(ball)
    assert len(ls.certified_lobes) == 6 and not ls.boundary_blocks
    assert set(ls.certified_lobes) == tagged_lobes(ball)
    assert all(len(b) == 3 for b in ls.certified_lobes)
    assert len(cut_vertices(ball)) == 5


def test_ex2_lobes_need_radius_two(ex2):
    ls1 = lobes(LobeGraph(ex2).ball(1))
    assert not ls1.certified_lobes and len(ls1.boundary_blocks) == 4
    ls2 = lobes(LobeGraph(ex2).ball(2))
    assert len(ls2.certified_lobes) == 2
    assert all(len(b) == 5 for b in ls2.certified_lobes)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_certified_lobes_are_lobe_copies(name, request):
    am = request.getfixturevalue(name)
    ball = LobeGraph(am).ball(3)
    certified = lobes(ball).certified_lobes
    assert set(certified) == tagged_lobes(ball)
    for a, b in itertools.combinations(certified, 2):
        assert len(a & b) <= 1
    for lobe in certified:
        dg = induced_digraph(ball, lobe)
        assert dg.is_isomorphic(am.lambda_digraph)
        assert nx.node_connectivity(nx.Graph(list(dg.arcs))) >= 2


def test_block_cut_tree_shape(ex1, ex2):
    t1 = block_cut_tree(LobeGraph(ex1).ball(2))
    assert t1.is_forest() and t1.is_bipartite()
    assert t1.degree(("v", VertexId())) == 2
    t2 = block_cut_tree(LobeGraph(ex2).ball(2))
    assert len(t2.lobes) == 2 and all(t2.degree(("L", k)) == 3 for k in range(2))
    t3 = block_cut_tree(LobeGraph(ex2).ball(3))
    assert any(t3.degree(("L", k)) == 5 for k in range(len(t3.lobes)))
    dot = t1.to_dot()
    assert "shape=circle" in dot and "shape=square" in dot


def test_bct_distances_are_tree_distances(ex1):
    t = block_cut_tree(LobeGraph(ex1).ball(3))
    dist = t.distances_from(("v", VertexId()))
    for node, d in dist.items():
        if node[0] == "v":
            assert d == tree_distance(VertexId(), node[1])


def test_disconnected_ball_rejected():
    from orbital_forge.graphengine import Ball

    ball = Ball.build(0, 1, {0: 0, 1: 1}, [], {}, {})
    with pytest.raises(InputError):
        lobes(ball)


def test_ends_ex1(ex1):
    rep = classify_ends(ex1, 3)
    assert rep.classification == "Uncountable" and rep.certificate == (2, 4, 8, 16)
    assert rep.status == "certified" and rep.inferred_from_theorem and rep.exact
    assert json.loads(rep.to_json())["certificate"] == [2, 4, 8, 16]


def test_ends_ex2(ex2):
    rep = classify_ends(ex2, 3)
    assert rep.classification == "Uncountable" and rep.certificate == (2, 6, 16, 44)


def test_ends_unresolved_at_radius_zero(ex1):
    rep = classify_ends(ex1, 0)
    assert rep.classification is None and rep.status == "unresolved" and rep.certificate == (2,)


def test_finite_lobe_has_zero_ends(ex1, ex2):
    assert classify_ends(ex1.lambda_digraph, 1).classification == "Zero"
    assert classify_ends(ex2.lambda_digraph, 1).classification == "Zero"


def test_finite_path_is_exhausted_not_two_ended():
    # seen from vertex 0 at one end; the walk always runs out, so never Two
    n = 40
    dg = FiniteDigraph(n, frozenset((i, i + 1) for i in range(n - 1)))
    rep = classify_ends(dg, 2)
    assert rep.classification == "Zero" and rep.certificate == (0, 0, 0)


def test_handle_ends_match_lobe_graph(ex2):
    h = OrbitalHandle(ex2, VertexId.parse("l0.v2"))
    assert classify_ends(h, 2).certificate == classify_ends(LobeGraph(ex2, (0, 2)), 2).certificate


def test_confined_handle_has_no_end_count(ex1):
    with pytest.raises(PreconditionError):
        classify_ends(OrbitalHandle(ex1, VertexId.parse("l0.v1/l1.v1")), 2)


def test_quasi_isometry_pentagon_pentagram(ex2):
    h1 = OrbitalHandle(ex2, VertexId.parse("l0.v1"))
    h2 = OrbitalHandle(ex2, VertexId.parse("l0.v2"))
    rep = quasi_isometry_check(h1, h2, 2)
    assert (rep.m1, rep.m2, rep.a) == (2, 2, 2)
    assert rep.valid and rep.verified_pairs > 100
    assert json.loads(rep.to_json())["violations"] == []


def test_tits_elliptic_and_hyperbolic(ex1):
    assert classify_tree_automorphism(ex1.identity, 4).kind == "Elliptic"
    for a in ex1.A_elems:
        cls = classify_tree_automorphism(ex1.element("A", a), 4)
        assert cls.kind == "Elliptic" and cls.fixed_vertex == VertexId()
    a = next(i for i in range(len(ex1.A_elems)) if i not in ex1.phi.values())
    p = next(i for i in range(len(ex1.P_elems)) if i not in ex1.H_P)
    cls = classify_tree_automorphism(ex1.from_letters([(SIDE_A, a), (SIDE_P, p)]), 4)
    assert cls.kind == "Hyperbolic" and cls.translation_length == 2


def test_tits_matches_brute_displacement(ex2):
    g = ex2.from_letters([(SIDE_A, 2), (SIDE_P, 1), (SIDE_A, 3), (SIDE_P, 4)])
    cls = classify_tree_automorphism(g, 4)
    letters = ex2.letters_of(g)
    from orbital_forge.decomposition import _node_image

    best = min(tree_distance(n, _node_image(ex2, letters, n)) for n in iter_tree_ball(ex2, 4))
    assert cls.translation_length == best or (cls.kind == "Elliptic" and best == 0)


def test_tits_unresolved_on_tiny_ball(ex1):
    a = next(i for i in range(len(ex1.A_elems)) if i not in ex1.phi.values())
    p = next(i for i in range(len(ex1.P_elems)) if i not in ex1.H_P)
    g = ex1.from_letters([(SIDE_A, a), (SIDE_P, p)] * 3)
    with pytest.raises(UnresolvedError):
        classify_tree_automorphism(g, 0)
