"""Lobes, cut vertices, block-cut-vertex trees, end counts and tree isometries.

All structure is read off finite balls. A block of a ball is reported as a
certified lobe only when it provably coincides with a lobe of the infinite
digraph; everything else is kept as an uncertified boundary block.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .amalgam import NormalForm, ValidatedAmalgam, VertexId
from .errors import CapacityError, InputError, PreconditionError, UnresolvedError
from .graphengine import (
    Ball,
    LobeGraph,
    LobeId,
    OrbitalHandle,
    iter_tree_ball,
    lobe_between,
    tree_distance,
)
from .permcore import FiniteDigraph

__all__ = [
    "LobeSet",
    "BlockCutTree",
    "EndReport",
    "QIReport",
    "TreeIsometryClass",
    "lobes",
    "cut_vertices",
    "block_cut_tree",
    "classify_ends",
    "quasi_isometry_check",
    "classify_tree_automorphism",
    "induced_digraph",
]

HANDLE_SEARCH_BUDGET = 5_000


@dataclass(frozen=True)
class LobeSet:
    certified_lobes: tuple[frozenset, ...]
    boundary_blocks: tuple[frozenset, ...]


def _ball_graph(ball: Ball) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(ball.vertices)
    g.add_edges_from(ball.arcs)
    return g


def _sort_key(block):
    return sorted(block)


def lobes(ball: Ball) -> LobeSet:
    graph = _ball_graph(ball)
    if ball.vertices and not nx.is_connected(graph):
        raise InputError("ball is disconnected")
    blocks = [frozenset(b) for b in nx.biconnected_components(graph)]
    complete = set(ball.complete_lobes().values())
    interior = ball.radius - 1
    certified, boundary = [], []
    for block in blocks:
        if ball.lobes:
            ok = block in complete
        else:
            ok = all(ball.depth[v] <= interior for v in block)
        (certified if ok else boundary).append(block)
    return LobeSet(tuple(sorted(certified, key=_sort_key)), tuple(sorted(boundary, key=_sort_key)))


def cut_vertices(ball: Ball) -> frozenset:
    """Articulation points of the ball whose whole neighbourhood lies inside it."""
    graph = _ball_graph(ball)
    if ball.vertices and not nx.is_connected(graph):
        raise InputError("ball is disconnected")
    return frozenset(v for v in nx.articulation_points(graph) if ball.depth[v] <= ball.radius - 1)


def induced_digraph(ball: Ball, vertex_set) -> FiniteDigraph:
    order = sorted(vertex_set)
    index = {v: k for k, v in enumerate(order)}
    arcs = {(index[u], index[w]) for u, w in ball.arcs if u in index and w in index}
    return FiniteDigraph(len(order), frozenset(arcs))


@dataclass
class BlockCutTree:
    root: object
    cut_vertices: tuple
    lobes: tuple[frozenset, ...]
    edges: tuple[tuple[int, int], ...]  # (cut-vertex index, lobe index)

    @property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(("v", v) for v in self.cut_vertices)
        g.add_nodes_from(("L", k) for k in range(len(self.lobes)))
        g.add_edges_from((("v", self.cut_vertices[c]), ("L", k)) for c, k in self.edges)
        return g

    def digraph(self) -> nx.DiGraph:
        """Both arcs of every incident pair, as in the bipartite definition."""
        return nx.DiGraph(self.graph)

    def degree(self, node) -> int:
        return self.graph.degree(node)

    def is_forest(self) -> bool:
        return len(self.graph) == 0 or nx.is_forest(self.graph)

    def is_bipartite(self) -> bool:
        return all(a[0] != b[0] for a, b in self.graph.edges)

    def distances_from(self, node) -> dict:
        return nx.single_source_shortest_path_length(self.graph, node)

    def to_dot(self, name: str = "bct") -> str:
        lines = [f"graph {name} {{"]
        for k, v in enumerate(self.cut_vertices):
            lines.append(f'  c{k} [shape=circle label="{v}"];')
        for k, lobe in enumerate(self.lobes):
            lines.append(f'  b{k} [shape=square label="L{k} ({len(lobe)})"];')
        for c, k in self.edges:
            lines.append(f"  c{c} -- b{k};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def block_cut_tree(ball: Ball) -> BlockCutTree:
    ls = lobes(ball)
    cuts = tuple(sorted(cut_vertices(ball)))
    edges = []
    for c, v in enumerate(cuts):
        for k, lobe in enumerate(ls.certified_lobes):
            if v in lobe:
                edges.append((c, k))
    return BlockCutTree(ball.root, cuts, ls.certified_lobes, tuple(sorted(edges)))


@dataclass(frozen=True)
class EndReport:
    classification: Optional[str]  # "Zero" | "One" | "Two" | "Uncountable" | None
    certificate: tuple[int, ...]
    monotone: bool
    status: str  # "certified" | "unresolved"
    inferred_from_theorem: bool
    exact: bool
    note: str = ""

    def to_json(self) -> str:
        return json.dumps(self.__dict__ | {"certificate": list(self.certificate)}, sort_keys=True)


class _DigraphSource:
    """A finite digraph viewed from vertex 0."""

    def __init__(self, digraph: FiniteDigraph):
        self.d = digraph
        self.adj = digraph.adjacency()

    def ball(self, r: int) -> Ball:
        dist = {0: 0} if self.d.n else {}
        frontier = list(dist)
        for k in range(1, r + 1):
            nxt = []
            for u in frontier:
                for w in self.adj[u]:
                    if w not in dist:
                        dist[w] = k
                        nxt.append(w)
            frontier = nxt
        arcs = [(u, w) for u, w in self.d.arcs if u in dist and w in dist]
        return Ball.build(0, r, dist, arcs, {}, {})


def _end_source(source):
    """Return (ball-provider, slack, exact) for an end computation."""
    if isinstance(source, FiniteDigraph):
        return _DigraphSource(source), source.n, True
    if isinstance(source, ValidatedAmalgam):
        source = LobeGraph(source)
    if isinstance(source, LobeGraph):
        return source, source.lobe_diameter, True
    if isinstance(source, OrbitalHandle):
        if source.span == 2:
            return source, LobeGraph(source.amalgam, source.lobe_arc).lobe_diameter, True
        if source.confined:
            raise PreconditionError("orbital digraph is disconnected: the seed lies in the root's block")
        base = LobeGraph(source.amalgam)
        step = base.lam.out_neighbors(source.amalgam.delta)[0]
        try:
            m2 = source.distance(VertexId(), VertexId(((0, step),)), limit=64, budget=HANDLE_SEARCH_BUDGET)
        except CapacityError:
            m2 = None
        if m2 is None:
            raise UnresolvedError("no path back to a neighbour of the root found; the digraph may be disconnected")
        a = max(m2, base.depth(source.beta))
        return source, a * (base.lobe_diameter + 1), False
    raise InputError(f"unsupported end source {type(source).__name__}")


def classify_ends(source, R: int) -> EndReport:
    """Count infinite components of the digraph minus the balls ``B_0..B_R``."""
    if R < 0:
        raise InputError("R must be non-negative")
    provider, slack, exact = _end_source(source)
    outer = R + 1 + slack
    ball = provider.ball(outer)
    adj = ball.undirected_adjacency()
    exhausted = not ball.sphere(outer)
    certificate = []
    for r in range(R + 1):
        seen, count = set(), 0
        for v in ball.vertices:
            if ball.depth[v] <= r or v in seen:
                continue
            comp, stack, reaches = {v}, [v], False
            while stack:
                x = stack.pop()
                if ball.depth[x] == outer:
                    reaches = True
                for y in adj[x]:
                    if y not in comp and ball.depth[y] > r:
                        comp.add(y)
                        stack.append(y)
            seen |= comp
            count += reaches
        certificate.append(count)
    cert = tuple(certificate)
    monotone = all(a <= b for a, b in zip(cert, cert[1:]))
    cls, status, inferred, note = None, "unresolved", False, ""
    if exhausted:
        cls, status, note = "Zero", "certified", "finite digraph exhausted"
    elif any(c >= 3 for c in cert):
        first = next(k for k, c in enumerate(cert) if c >= 3)
        tail = cert[first:]
        if all(a < b for a, b in zip(tail, tail[1:])):
            cls, status, inferred = "Uncountable", "certified", True
            note = "component growth plus vertex-transitivity excludes finitely many ends"
        else:
            note = "component counts >= 3 but not strictly growing"
    elif R >= 1 and all(c == 1 for c in cert):
        cls, status = "One", "certified"
    elif R >= 2 and all(c == 2 for c in cert):
        cls, status = "Two", "certified"
    else:
        note = f"certificate {list(cert)} does not settle the count at R={R}"
    return EndReport(cls, cert, monotone, status, inferred, exact, note)


@dataclass(frozen=True)
class QIReport:
    m1: int
    m2: int
    a: int
    verified_pairs: int
    violations: tuple = field(default=())

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(
            {
                "m1": self.m1,
                "m2": self.m2,
                "a": self.a,
                "verified_pairs": self.verified_pairs,
                "violations": [[str(u), str(w), d1, d2] for u, w, d1, d2 in self.violations],
            },
            sort_keys=True,
        )


def _distance_fn(handle: OrbitalHandle):
    if handle.span == 2:
        lg = LobeGraph(handle.amalgam, handle.lobe_arc)
        return lambda u, w, limit: lg.distance(u, w)
    return handle.distance


def quasi_isometry_check(handle1: OrbitalHandle, handle2: OrbitalHandle, r: int) -> QIReport:
    """Check ``d1/a <= d2 <= a*d1`` over all vertex pairs of both radius-``r`` balls."""
    if handle1.amalgam.digest != handle2.amalgam.digest:
        raise InputError("handles must share an amalgam")
    if handle1.confined or handle2.confined:
        raise PreconditionError("a disconnected orbital digraph has no quasi-isometry to the other")
    d1, d2 = _distance_fn(handle1), _distance_fn(handle2)
    root = VertexId()
    m1 = d1(root, handle2.beta, 10**6)
    m2 = d2(root, handle1.beta, 10**6)
    if m1 is None or m2 is None:
        raise UnresolvedError("seeds not mutually reachable")
    a = max(m1, m2)
    verts = sorted(set(handle1.ball(r).vertices) | set(handle2.ball(r).vertices))
    violations, pairs = [], 0
    for i, u in enumerate(verts):
        for w in verts[i + 1:]:
            x = d1(u, w, 4 * a * r + 1)
            y = d2(u, w, a * (x if x is not None else 4 * a * r) + 1)
            pairs += 1
            if x is None or y is None or not (x <= a * y and y <= a * x):
                violations.append((u, w, x, y))
    return QIReport(m1, m2, a, pairs, tuple(violations))


@dataclass(frozen=True)
class TreeIsometryClass:
    kind: str  # "Elliptic" | "Hyperbolic"
    fixed_vertex: object = None
    translation_length: int = 0
    axis_sample: object = None


def _node_image(amalgam: ValidatedAmalgam, letters, node):
    if isinstance(node, VertexId):
        return amalgam.act_letters(letters, node)
    first = next(e for e in amalgam.labels if e != amalgam.delta)
    u = amalgam.act_letters(letters, node.parent)
    w = amalgam.act_letters(letters, node.parent.child(node.index, first))
    return lobe_between(u, w)


def _node_key(node):
    depth = tree_distance(VertexId(), node)
    return (depth, str(node))


def classify_tree_automorphism(g: NormalForm, R: int) -> TreeIsometryClass:
    """Elliptic or hyperbolic, from the minimum displacement over a tree ball."""
    am = g._amalgam
    letters = am.letters_of(g)
    best, attained = None, []
    for node in iter_tree_ball(am, R):
        disp = tree_distance(node, _node_image(am, letters, node))
        if best is None or disp < best:
            best, attained = disp, [node]
        elif disp == best:
            attained.append(node)
    interior = [n for n in attained if tree_distance(VertexId(), n) < R]
    if not interior:
        raise UnresolvedError(f"displacement minimum {best} only attained on the boundary at R={R}")
    sample = min(interior, key=_node_key)
    if best == 0:
        return TreeIsometryClass("Elliptic", fixed_vertex=sample)
    return TreeIsometryClass("Hyperbolic", translation_length=best, axis_sample=sample)


def tree_node_is_lobe(node) -> bool:
    return isinstance(node, LobeId)
