"""Canonical connectivity-one orbital digraphs: construction, recognition,
equivalence, enumeration, centroids and the amalgam decomposition.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .amalgam import SIDE_A, SIDE_P, ValidatedAmalgam, VertexId
from .decomposition import (
    BlockCutTree,
    classify_ends,
    induced_digraph,
    lobes,
)
from .errors import (
    CapacityError,
    ConsistencyError,
    InputError,
    PreconditionError,
    UnresolvedError,
)
from .graphengine import (
    Ball,
    LobeGraph,
    LobeId,
    OrbitalHandle,
    iter_tree_ball,
    lobe_between,
    suborbits,
)
from .permcore import (
    FiniteDigraph,
    FiniteGroup,
    Permutation,
    is_primitive,
    is_regular,
    orbital_digraphs,
)

MAXIMALITY_CAP = 10**4

__all__ = [
    "CanonicalDescriptor",
    "RefinementTrace",
    "CentroidResult",
    "FundamentalDomainReport",
    "construct_canonical",
    "verify_canonical",
    "lobe_group",
    "refine_to_canonical",
    "enumerate_canonical",
    "check_equivalence",
    "centroid",
    "verify_segment_fundamental_domain",
    "amalgam_decomposition_report",
    "block_search",
]


@dataclass(frozen=True)
class CanonicalDescriptor:
    amalgam: ValidatedAmalgam = field(repr=False, compare=False)
    m: int
    lam: FiniteDigraph
    lambda_arc: tuple[int, int]
    seed: tuple[VertexId, VertexId]
    lobe_vertices: frozenset

    @property
    def graph(self) -> LobeGraph:
        return LobeGraph(self.amalgam, self.lambda_arc)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "lambda_arc": list(self.lambda_arc),
            "lobe_order": self.lam.n,
            "lobe_arcs": [list(a) for a in self.lam.sorted_arcs()],
            "seed": [str(self.seed[0]), str(self.seed[1])],
            "lobe_vertices": sorted(str(v) for v in self.lobe_vertices),
        }

    def lambda_dot(self, name: str = "lobe") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f"  {u} -> {v};" for u, v in self.lam.sorted_arcs()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _root_lobe(amalgam: ValidatedAmalgam, index: int = 0) -> LobeId:
    return LobeId(VertexId(), index)


def _descriptor(amalgam: ValidatedAmalgam, arc) -> CanonicalDescriptor:
    lg = LobeGraph(amalgam, arc)
    lobe = _root_lobe(amalgam)
    return CanonicalDescriptor(
        amalgam=amalgam,
        m=amalgam.m,
        lam=lg.lam,
        lambda_arc=tuple(arc),
        seed=(VertexId(), VertexId(((0, arc[1]),))),
        lobe_vertices=frozenset(w for _, w in lg.members(lobe)),
    )


def _lobe_carrier(amalgam: ValidatedAmalgam, lobe: LobeId) -> list:
    """Letters of an element carrying the root lobe ``#0`` onto ``lobe``."""
    letters = []
    if lobe.index:
        letters.append((SIDE_A, amalgam.reps[SIDE_A][lobe.index]))
    return letters + amalgam.vertex_letters(lobe.parent)


def _inverse_letters(amalgam, letters):
    return [(s, amalgam.inverse_index(s, f)) for s, f in reversed(letters)]


def _find_lobe_id(ball: Ball, vertex_set) -> LobeId:
    target = frozenset(vertex_set)
    for lobe, (members, full) in ball.lobes.items():
        if members == target and full:
            return lobe
    raise InputError("vertex set is not a certified lobe of this ball")


def lobe_group(ball: Ball, lobe_vertices, amalgam: ValidatedAmalgam) -> FiniteGroup:
    """Permutation group induced on a certified lobe by its setwise stabiliser.

    The stabiliser is the conjugate of ``P`` by an element carrying the root
    lobe onto this lobe; points are the lobe's vertices in address order.
    """
    if frozenset(lobe_vertices) not in lobes(ball).certified_lobes:
        raise InputError("lobe is not certified in this ball")
    lobe = _find_lobe_id(ball, lobe_vertices)
    x = _lobe_carrier(amalgam, lobe)
    x_inv = _inverse_letters(amalgam, x)
    points = sorted(lobe_vertices)
    index = {v: k for k, v in enumerate(points)}
    gens = []
    for q in amalgam.spec.P.generators:
        conj = x_inv + [(SIDE_P, amalgam.index_of(SIDE_P, q))] + x
        images = [index.get(amalgam.act_letters(conj, v)) for v in points]
        if any(i is None for i in images):
            raise ConsistencyError("lobe stabiliser does not preserve the lobe")
        gens.append(Permutation(tuple(images)))
    return FiniteGroup(len(points), tuple(gens))


def verify_canonical(desc: CanonicalDescriptor, r: int) -> dict:
    """Re-check the structural conditions on every certified lobe of a radius-``r`` ball."""
    ball = desc.graph.ball(r)
    certified = lobes(ball).certified_lobes
    result = {"lobes": len(certified), "isomorphic": True, "primitive": True,
              "non_regular": True, "order_ok": desc.lam.n >= 3}
    for lobe in certified:
        if not induced_digraph(ball, lobe).is_isomorphic(desc.lam):
            result["isomorphic"] = False
        grp = lobe_group(ball, lobe, desc.amalgam)
        if not is_primitive(grp):
            result["primitive"] = False
        if is_regular(grp):
            result["non_regular"] = False
    result["ok"] = bool(certified) and all(
        result[k] for k in ("isomorphic", "primitive", "non_regular", "order_ok")
    )
    return result


def construct_canonical(amalgam: ValidatedAmalgam, lambda_arc=None, verify_radius: int = 3):
    arc = tuple(lambda_arc) if lambda_arc is not None else tuple(amalgam.spec.lambda_arc)
    desc = _descriptor(amalgam, arc)
    check = verify_canonical(desc, verify_radius)
    if not check["ok"]:
        raise ConsistencyError(f"canonical conditions fail for arc {arc}: {check}")
    return desc


def enumerate_canonical(amalgam: ValidatedAmalgam, verify_radius: int = 2) -> list:
    """One descriptor per non-diagonal orbital digraph of the lobe group."""
    out = []
    for dg in orbital_digraphs(amalgam.spec.P):
        target = min(v for u, v in dg.arcs if u == amalgam.delta)
        out.append(construct_canonical(amalgam, (amalgam.delta, target), verify_radius))
    return out


def check_equivalence(d1: CanonicalDescriptor, d2: CanonicalDescriptor, r: int = 3) -> bool:
    """Same multiplicity and identical lobe vertex sets wherever both balls see a lobe."""
    if d1.amalgam.digest != d2.amalgam.digest:
        raise InputError("descriptors come from different amalgams")
    if d1.m != d2.m:
        return False
    b1, b2 = d1.graph.ball(r), d2.graph.ball(r)
    c1, c2 = set(lobes(b1).certified_lobes), set(lobes(b2).certified_lobes)
    v1, v2 = set(b1.vertices), set(b2.vertices)
    shared = 0
    for mine, theirs, verts in ((c1, c2, v2), (c2, c1, v1)):
        for lobe in mine:
            if lobe <= verts:
                if lobe not in theirs:
                    return False
                shared += 1
    return shared > 0


@dataclass
class RefinementTrace:
    stages: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    n: int = 0

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "stages": self.stages, "rejected": self.rejected},
                          sort_keys=True, indent=2)


def _separates_root(handle: OrbitalHandle, radius: int) -> Optional[bool]:
    """``False`` if the root is certainly not a cut vertex, ``True`` if it certainly is."""
    if handle.span == 2:
        return True  # arcs never leave a lobe and every vertex lies in m >= 2 lobes
    ball = handle.ball(radius)
    adj = ball.undirected_adjacency()
    root = VertexId()
    nbrs = sorted(adj[root])
    seen, stack = {nbrs[0]}, [nbrs[0]]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y != root and y not in seen:
                seen.add(y)
                stack.append(y)
    if all(w in seen for w in nbrs):
        return False
    return None


def refine_to_canonical(handle: OrbitalHandle, max_distance: int = 4, check_radius: int = 3,
                        end_radius: int = 2):
    """Search for a connectivity-one orbital digraph and descend into its lobe.

    Candidates are the suborbit representatives of ``handle``'s digraph in
    order of distance, then address. Returns ``(descriptor, trace)``.
    """
    am = handle.amalgam
    ends = classify_ends(handle, end_radius)
    if ends.classification not in ("Two", "Uncountable"):
        raise PreconditionError(f"source must have more than one end, got {ends.classification}")
    trace = RefinementTrace()
    found = None
    report = suborbits(handle, max_distance)
    for radius, level in enumerate(report.orbits):
        if radius == 0:
            continue
        for orbit in level:
            cand = orbit[0]
            ch = OrbitalHandle(am, cand)
            if ch.confined:
                trace.rejected.append({"seed": str(cand), "distance": radius, "span": ch.span,
                                       "reason": "disconnected"})
                continue
            verdict = _separates_root(ch, check_radius)
            if verdict:
                found = ch
                break
            trace.rejected.append({
                "seed": str(cand),
                "distance": radius,
                "span": ch.span,
                "reason": "root not a cut vertex" if verdict is False else "uncertified",
            })
        if found:
            break
    if found is None:
        trace.n = 0
        raise UnresolvedError("no certified connectivity-one seed within caps", partial=trace)
    lobe = LobeId(VertexId(), found.beta.steps[0][0])
    lg = LobeGraph(am, found.lobe_arc)
    members = frozenset(w for _, w in lg.members(lobe))
    lobe_ends = classify_ends(lg.lam, 1)
    trace.stages.append({
        "seed": str(found.beta),
        "span": found.span,
        "lobe_vertices": sorted(str(v) for v in members),
        "group_marker": f"P^{lobe.index and 'a' + str(lobe.index) or 'e'}",
        "lobe_ends": lobe_ends.classification,
    })
    if lobe_ends.classification != "Zero":
        raise UnresolvedError("infinite lobes are not realised", partial=trace)
    trace.n = len(trace.stages)
    desc = construct_canonical(am, found.lobe_arc)
    if not any(check_equivalence(desc, e) for e in enumerate_canonical(am)):
        raise ConsistencyError("refinement result is not equivalent to an enumerated digraph")
    return desc, trace


@dataclass(frozen=True)
class CentroidResult:
    node: tuple  # ("v", VertexId) or ("L", index) in the tree
    distance: int
    lobe_vertices: Optional[frozenset] = None


def centroid(lobe_vertices, tree: BlockCutTree) -> CentroidResult:
    targets = [("v", v) for v in sorted(lobe_vertices)]
    graph = tree.graph
    if not targets:
        raise InputError("empty vertex set")
    missing = [t for t in targets if t not in graph]
    if missing:
        raise UnresolvedError(f"{len(missing)} lobe vertices are not interior to the tree")
    dist = {t: nx.single_source_shortest_path_length(graph, t) for t in targets}
    best, best_val = None, None
    for node in sorted(graph.nodes, key=str):
        if any(node not in dist[t] for t in targets):
            continue
        worst = max(dist[t][node] for t in targets)
        if best_val is None or worst < best_val:
            best, best_val = node, worst
    if best is None:
        raise UnresolvedError("lobe vertices lie in different tree components")
    if len({dist[t][best] for t in targets}) != 1:
        raise ConsistencyError("centroid is not equidistant from the lobe vertices")
    lobe = tree.lobes[best[1]] if best[0] == "L" else None
    return CentroidResult(best, best_val, lobe)


@dataclass(frozen=True)
class FundamentalDomainReport:
    vertex_orbits: int
    arc_orbits: int
    inversions: tuple
    segment: tuple
    nodes_covered: int
    arcs_covered: int

    def to_dict(self) -> dict:
        return {
            "vertex_orbits": self.vertex_orbits,
            "arc_orbits": self.arc_orbits,
            "inversions": list(self.inversions),
            "segment": list(self.segment),
            "nodes_covered": self.nodes_covered,
            "arcs_covered": self.arcs_covered,
        }


def _lobe_image(am: ValidatedAmalgam, letters, lobe: LobeId) -> Optional[LobeId]:
    first = next(e for e in am.labels if e != am.delta)
    u = am.act_letters(letters, lobe.parent)
    w = am.act_letters(letters, lobe.parent.child(lobe.index, first))
    return lobe_between(u, w)


def verify_segment_fundamental_domain(amalgam: ValidatedAmalgam, R: int) -> FundamentalDomainReport:
    """Cover a radius-``R`` ball of the tree by images of the segment ``(alpha, x)``."""
    if R < 2:
        raise PreconditionError("R must be at least 2")
    am = amalgam
    alpha, x = VertexId(), LobeId(VertexId(), 0)
    nodes = list(iter_tree_ball(am, R))
    node_set = set(nodes)
    reps_used = set()
    for node in nodes:
        if isinstance(node, VertexId):
            g = am.vertex_letters(node)
            ok = am.act_letters(g, alpha) == node
            rep = alpha
        else:
            g = _lobe_carrier(am, node)
            ok = _lobe_image(am, g, x) == node
            rep = x
        if not ok:
            raise UnresolvedError(f"no constructed element reaches {node}")
        reps_used.add(rep)
    lg = LobeGraph(am)
    arcs_covered, inversions = 0, []
    for node in nodes:
        if not isinstance(node, VertexId):
            continue
        for lobe in lg.lobes_at(node):
            if lobe not in node_set:
                continue
            g = am.vertex_letters(node)
            if lobe.parent == node and lobe.index:
                g = [(SIDE_A, am.reps[SIDE_A][lobe.index])] + g
            img = (am.act_letters(g, alpha), _lobe_image(am, g, x))
            if img != (node, lobe):
                raise UnresolvedError(f"arc ({node}, {lobe}) not covered")
            arcs_covered += 1
    # An inversion would send the vertex end of some arc to a lobe end.
    gens = [[(SIDE_A, am.index_of(SIDE_A, a))] for a in am.spec.A.generators]
    gens += [[(SIDE_P, am.index_of(SIDE_P, p))] for p in am.spec.P.generators]
    for g in gens:
        for node in nodes:
            if isinstance(node, VertexId):
                img = am.act_letters(g, node)
                if not isinstance(img, VertexId):
                    inversions.append(str(node))
            else:
                if _lobe_image(am, g, node) is None:
                    inversions.append(str(node))
    return FundamentalDomainReport(
        vertex_orbits=len(reps_used),
        arc_orbits=1 if arcs_covered else 0,
        inversions=tuple(inversions),
        segment=(str(alpha), str(x)),
        nodes_covered=len(nodes),
        arcs_covered=arcs_covered,
    )


def amalgam_decomposition_report(amalgam: ValidatedAmalgam) -> dict:
    P = amalgam.spec.P
    if P.order() > MAXIMALITY_CAP:
        raise CapacityError(f"|P| = {P.order()} exceeds maximality cap {MAXIMALITY_CAP}")
    H = [amalgam.P_elems[i] for i in amalgam.H_P]
    h_set = set(H)
    h_gens = tuple(h for h, _ in amalgam.spec.embedding)
    nontrivial = len(H) > 1
    intermediate = None
    for g in P.elements:
        if g in h_set:
            continue
        if FiniteGroup(P.degree, h_gens + (g,)).order() != P.order():
            intermediate = g
            break
    fixed = [e for e in range(P.degree)
             if e != amalgam.delta and all(h(e) == e for h in H)]
    return {
        "nontrivial": nontrivial,
        "maximal": intermediate is None,
        "intermediate_witness": intermediate.cycle_string() if intermediate else None,
        "fixes_no_other_point": not fixed,
        "fixed_points": fixed,
        "H_order": len(H),
        "P_order": P.order(),
        "index_in_A": amalgam.m,
        "triple": {
            "A": [a.cycle_string() for a in amalgam.spec.A.generators],
            "H": [h.cycle_string() for h in h_gens],
            "P": [p.cycle_string() for p in P.generators],
        },
        "ok": nontrivial and intermediate is None and not fixed,
    }


def _orbit_evidence(amalgam, lg, ball, search_radius):
    root = VertexId()
    targets = {w for w, _ in lg.neighbors(root)}
    a_gens = [[(SIDE_A, amalgam.index_of(SIDE_A, a))] for a in amalgam.spec.A.generators]
    checked = 0
    for v in ball.vertices:
        if v == root or v in targets:
            continue
        g = amalgam.vertex_letters(v)
        moves = a_gens + [g, _inverse_letters(amalgam, g)]
        orbit, frontier, hit = {root}, [root], False
        while frontier and not hit:
            nxt = []
            for x in frontier:
                for mv in moves:
                    y = amalgam.act_letters(mv, x)
                    if y in targets:
                        hit = True
                        break
                    if y not in orbit and lg.depth(y) <= search_radius:
                        orbit.add(y)
                        nxt.append(y)
                if hit:
                    break
            frontier = nxt
        checked += 1
        if not hit:
            return v, sorted(u for u in orbit if u in ball.depth), checked
    return None, None, checked


def block_search(amalgam: ValidatedAmalgam, r: int, search_radius: int | None = None) -> dict:
    """Look for a proper block of imprimitivity of ``G`` through the root.

    If ``A`` retracts onto ``H``, the retraction and the identity of ``P`` glue
    to a surjection ``theta: G -> P`` with ``theta(A) = H``; the fibres of
    ``A g -> delta^theta(g)`` then form a G-invariant partition into ``|Delta|``
    infinite blocks. That witness is exact and is checked against every
    generator inside the ball. Without a retraction the search falls back to
    ball evidence: the smallest block through the root and ``v`` is the orbit
    of the root under ``<A, g>`` (``root^g = v``), explored through vertices
    within ``search_radius`` (default ``2 r``); reaching a neighbour of the
    root rules out a proper block, otherwise the pair is an uncertified
    candidate.
    """
    lg = LobeGraph(amalgam)
    ball = lg.ball(r)
    root = VertexId()
    rho = amalgam.retraction
    if rho is not None:
        label = {v: amalgam.block_label(v) for v in ball.vertices}
        gens = [[(SIDE_A, amalgam.index_of(SIDE_A, a))] for a in amalgam.spec.A.generators]
        gens += [[(SIDE_P, amalgam.index_of(SIDE_P, p))] for p in amalgam.spec.P.generators]
        for mv in gens:
            shift = {}
            for v in ball.vertices:
                w = amalgam.act_letters(mv, v)
                if w not in label:
                    continue
                if shift.setdefault(label[v], label[w]) != label[w]:
                    raise ConsistencyError(f"block labelling not invariant at {v}")
        block = sorted(v for v in ball.vertices if label[v] == label[root])
        partner = next((v for v in block if v != root), None)
        return {
            "radius": r,
            "found": True,
            "certified": True,
            "method": "retraction",
            "blocks": amalgam.lambda_digraph.n,
            "retraction": {str(amalgam.A_elems[a]): str(amalgam.P_elems[h]) for a, h in sorted(rho.items())},
            "pair": [str(root), str(partner)] if partner is not None else None,
            "block": [str(v) for v in block],
        }
    search_radius = 2 * r if search_radius is None else search_radius
    v, inside, checked = _orbit_evidence(amalgam, lg, ball, search_radius)
    if v is None:
        return {"radius": r, "found": False, "certified": False, "method": "orbit",
                "pairs_checked": checked, "search_radius": search_radius}
    return {"radius": r, "found": True, "certified": False, "method": "orbit",
            "search_radius": search_radius, "pair": [str(root), str(v)],
            "block": [str(u) for u in inside]}
