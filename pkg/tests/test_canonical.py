import json

import pytest
from conftest import imprimitive_toy, make_spec

from orbital_forge.amalgam import VertexId, validate
from orbital_forge.canonical import (
    amalgam_decomposition_report,
    block_search,
    centroid,
    check_equivalence,
    construct_canonical,
    enumerate_canonical,
    lobe_group,
    refine_to_canonical,
    verify_canonical,
    verify_segment_fundamental_domain,
)
from orbital_forge.decomposition import block_cut_tree, lobes
from orbital_forge.errors import InputError, PreconditionError, UnresolvedError
from orbital_forge.graphengine import LobeGraph, OrbitalHandle
from orbital_forge.permcore import is_primitive, is_regular


def arcs_of(desc):
    return sorted(desc.lam.arcs)


def test_construct_ex1(ex1):
    d = construct_canonical(ex1)
    assert d.m == 2 and d.lam.n == 3 and len(d.lam.arcs) == 6
    assert sorted(str(v) for v in d.lobe_vertices) == ["", "l0.v1", "l0.v2"]


def test_construct_ex2_pentagon_and_pentagram(ex2):
    pentagon = construct_canonical(ex2)
    pentagram = construct_canonical(ex2, (0, 2))
    assert arcs_of(pentagon) == sorted((i, (i + s) % 5) for i in range(5) for s in (1, 4))
    assert arcs_of(pentagram) == sorted((i, (i + s) % 5) for i in range(5) for s in (2, 3))
    assert pentagon.lam.is_isomorphic(pentagram.lam)
    doc = pentagram.to_dict()
    assert doc["lambda_arc"] == [0, 2] and doc["lobe_order"] == 5
    assert pentagram.lambda_dot().count("->") == 10


def test_verify_canonical_reports(ex1):
    rep = verify_canonical(construct_canonical(ex1), 3)
    assert rep["ok"] and rep["lobes"] == 14


def test_lobe_groups(ex1, ex2):
    ball = LobeGraph(ex1).ball(3)
    certified = lobes(ball).certified_lobes
    for lobe in certified:
        grp = lobe_group(ball, lobe, ex1)
        assert grp.order() == 6 and is_primitive(grp) and not is_regular(grp)
    ball2 = LobeGraph(ex2).ball(3)
    root_lobe = construct_canonical(ex2).lobe_vertices
    grp = lobe_group(ball2, root_lobe, ex2)
    assert grp.order() == 10 and is_primitive(grp) and not is_regular(grp)


def test_lobe_group_needs_certified_lobe(ex2):
    ball = LobeGraph(ex2).ball(1)
    with pytest.raises(InputError):
        lobe_group(ball, frozenset(ball.vertices[:3]), ex2)


def test_enumeration_counts(ex1, ex2):
    assert [d.lambda_arc for d in enumerate_canonical(ex1)] == [(0, 1)]
    assert [d.lambda_arc for d in enumerate_canonical(ex2)] == [(0, 1), (0, 2)]


def test_equivalence(ex1, ex2):
    d1, d2 = enumerate_canonical(ex2)
    assert check_equivalence(d1, d2, 3) and check_equivalence(d1, d1, 3)
    with pytest.raises(InputError):
        check_equivalence(d1, enumerate_canonical(ex1)[0])


def test_centroid_pentagon_in_pentagram_tree(ex2):
    pentagon, pentagram = enumerate_canonical(ex2)
    tree = block_cut_tree(pentagram.graph.ball(3))
    res = centroid(pentagon.lobe_vertices, tree)
    assert res.node[0] == "L" and res.distance == 1
    assert tree.lobes[res.node[1]] == pentagon.lobe_vertices


def test_centroid_degenerate_and_self(ex1, ex2):
    tree = block_cut_tree(LobeGraph(ex2, (0, 2)).ball(3))
    res = centroid({VertexId()}, tree)
    assert res.node == ("v", VertexId()) and res.distance == 0
    d = construct_canonical(ex1)
    own = centroid(d.lobe_vertices, block_cut_tree(d.graph.ball(3)))
    assert own.node[0] == "L" and own.distance == 1


def test_centroid_outside_tree(ex2):
    tree = block_cut_tree(LobeGraph(ex2).ball(2))
    with pytest.raises(UnresolvedError):
        centroid({VertexId.parse("l0.v1/l1.v1/l1.v1")}, tree)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_fundamental_domain(name, request):
    rep = verify_segment_fundamental_domain(request.getfixturevalue(name), 3)
    assert (rep.vertex_orbits, rep.arc_orbits, len(rep.inversions)) == (2, 1, 0)


def test_fundamental_domain_precondition(ex1):
    with pytest.raises(PreconditionError):
        verify_segment_fundamental_domain(ex1, 0)


def test_decomposition_reports(ex1, ex2):
    r1 = amalgam_decomposition_report(ex1)
    assert r1["ok"] and r1["maximal"] and r1["nontrivial"] and r1["fixes_no_other_point"]
    assert r1["triple"]["H"] == ["(1 2)"]
    r2 = amalgam_decomposition_report(ex2)
    assert r2["ok"] and r2["H_order"] == 2 and r2["P_order"] == 10


def test_refine_span_two_seeds(ex1, ex2):
    desc, trace = refine_to_canonical(OrbitalHandle(ex1, VertexId.parse("l0.v1")))
    assert desc.lambda_arc == (0, 1) and trace.n == 1
    desc, trace = refine_to_canonical(OrbitalHandle(ex2, VertexId.parse("l0.v2")))
    assert desc.lambda_arc == (0, 2) and trace.n == 1
    assert json.loads(trace.to_json())["stages"][0]["lobe_ends"] == "Zero"


def test_refine_rejects_seed_inside_a_block(ex1):
    with pytest.raises(PreconditionError):
        refine_to_canonical(OrbitalHandle(ex1, VertexId.parse("l0.v1/l1.v1")))


def test_block_search_retraction_witness(ex1, ex2):
    rep = block_search(ex1, 3)
    assert rep["found"] and rep["certified"] and rep["blocks"] == 3
    assert rep["pair"] == ["", "l0.v1/l1.v1"] and len(rep["block"]) == 9
    rep = block_search(ex2, 2)
    assert rep["found"] and rep["certified"] and rep["blocks"] == 5 and len(rep["block"]) == 5


def test_block_search_toy_imprimitive():
    rep = block_search(imprimitive_toy(), 3)
    assert rep["found"] and rep["blocks"] == 4


def test_block_search_without_retraction():
    am = validate(make_spec(3, ["(0 1 2)", "(1 2)"], 4, ["(0 1 2 3)"], [("(1 2)", "(0 2)(1 3)")], (0, 1)))
    rep = block_search(am, 2)
    assert rep["method"] == "orbit" and not rep["found"] and rep["pairs_checked"] == 8
