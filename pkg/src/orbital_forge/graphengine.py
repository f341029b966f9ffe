"""Lazy realisation of connectivity-one digraphs and orbital digraphs on ``G/A``.

Addressing: a vertex is reached from the root by steps ``(lobe, label)``.
At the root the lobe choice ranges over ``0..m-1``; below the root choice 0
is the lobe the vertex hangs from, so only ``1..m-1`` descend. A lobe is
identified by ``(parent, lobe)`` and its members are ``parent`` (label
``delta``) and ``parent.child(lobe, e)`` for every other label ``e``.
"""
from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .amalgam import SIDE_A, ValidatedAmalgam, VertexId
from .errors import CapacityError, InputError
from .permcore import FiniteDigraph

DEFAULT_MAX_VERTICES = 10**6

__all__ = [
    "LobeId",
    "Ball",
    "OrbitalHandle",
    "SuborbitReport",
    "LobeGraph",
    "expand_ball",
    "neighbors",
    "orbital_ball",
    "suborbits",
    "tree_path",
    "tree_distance",
    "max_vertices",
    "ball_to_json",
    "ball_to_dot",
]


def max_vertices() -> int:
    raw = os.environ.get("ORBITAL_FORGE_MAX_VERTICES")
    if not raw:
        return DEFAULT_MAX_VERTICES
    try:
        cap = int(raw)
    except ValueError:
        raise InputError(f"ORBITAL_FORGE_MAX_VERTICES must be an integer, got {raw!r}") from None
    if cap < 1:
        raise InputError("ORBITAL_FORGE_MAX_VERTICES must be positive")
    return cap


@dataclass(frozen=True, order=True)
class LobeId:
    parent: VertexId
    index: int

    def __str__(self) -> str:
        return f"{self.parent}#{self.index}"


def tree_path(node) -> list:
    """Nodes of the block-cut-vertex tree from the root to ``node``."""
    if isinstance(node, LobeId):
        return tree_path(node.parent) + [node]
    path = [VertexId()]
    for k, (i, _) in enumerate(node.steps):
        prefix = VertexId(node.steps[:k])
        path.append(LobeId(prefix, i))
        path.append(VertexId(node.steps[: k + 1]))
    return path


def tree_distance(x, y) -> int:
    px, py = tree_path(x), tree_path(y)
    common = 0
    for a, b in zip(px, py):
        if a != b:
            break
        common += 1
    return len(px) + len(py) - 2 * common


def _tree_geodesic(x, y) -> list:
    px, py = tree_path(x), tree_path(y)
    common = 0
    for a, b in zip(px, py):
        if a != b:
            break
        common += 1
    return list(reversed(px[common - 1:])) + py[common:]


def lobe_between(u: VertexId, w: VertexId) -> LobeId | None:
    """The lobe containing both vertices, if they share one."""
    path = _tree_geodesic(u, w)
    return path[1] if len(path) == 3 else None


class LobeGraph:
    """The digraph ``Gamma(m, Lambda')`` whose lobes copy the orbital digraph of ``arc``."""

    def __init__(self, amalgam: ValidatedAmalgam, arc: tuple[int, int] | None = None):
        self.amalgam = amalgam
        self.arc = tuple(arc) if arc is not None else tuple(amalgam.spec.lambda_arc)
        if self.arc[0] != amalgam.delta or self.arc[1] == amalgam.delta:
            raise InputError(f"lobe arc {self.arc} must be (delta, delta') with delta' != delta")
        from .amalgam import _orbital_digraph_of

        self.lam: FiniteDigraph = _orbital_digraph_of(amalgam.spec.P, self.arc)
        if not self.lam.is_connected():
            raise InputError(f"orbital digraph of {self.arc} is disconnected")
        self.m = amalgam.m
        self.delta = amalgam.delta
        self.other_labels = [e for e in amalgam.labels if e != self.delta]
        n = self.lam.n
        self.lobe_dist = [[0] * n for _ in range(n)]
        for s in range(n):
            for t, d in self.lam.distances_from(s).items():
                self.lobe_dist[s][t] = d
        self.out_labels = {u: set(self.lam.out_neighbors(u)) for u in range(n)}
        self.in_labels = {u: set(self.lam.in_neighbors(u)) for u in range(n)}

    @cached_property
    def lobe_diameter(self) -> int:
        return self.lam.diameter()

    # structure ---------------------------------------------------------------

    def child_lobes(self, v: VertexId) -> list[LobeId]:
        start = 0 if v.is_root else 1
        return [LobeId(v, i) for i in range(start, self.m)]

    def lobes_at(self, v: VertexId) -> list[LobeId]:
        out = [] if v.is_root else [LobeId(v.parent, v.steps[-1][0])]
        return out + self.child_lobes(v)

    def members(self, lobe: LobeId) -> list[tuple[int, VertexId]]:
        out = [(self.delta, lobe.parent)]
        out.extend((e, lobe.parent.child(lobe.index, e)) for e in self.other_labels)
        return out

    def label_in(self, lobe: LobeId, v: VertexId) -> int:
        if v == lobe.parent:
            return self.delta
        return v.steps[-1][1]

    def neighbors(self, v: VertexId) -> list[tuple[VertexId, str]]:
        out = []
        for lobe in self.lobes_at(v):
            lab = self.label_in(lobe, v)
            outs, ins = self.out_labels[lab], self.in_labels[lab]
            for e, w in self.members(lobe):
                if e in outs or e in ins:
                    direction = "both" if (e in outs and e in ins) else ("out" if e in outs else "in")
                    out.append((w, direction))
        out.sort()
        return out

    def distance(self, u: VertexId, w: VertexId) -> int:
        """Exact undirected distance, summing in-lobe distances along the tree path."""
        path = _tree_geodesic(u, w)
        total = 0
        for k in range(1, len(path) - 1):
            node = path[k]
            if isinstance(node, LobeId):
                a, b = path[k - 1], path[k + 1]
                total += self.lobe_dist[self.label_in(node, a)][self.label_in(node, b)]
        return total

    def depth(self, v: VertexId) -> int:
        return self.distance(VertexId(), v)

    def projected_size(self, r: int) -> int:
        """Number of vertices within distance ``r`` of the root."""
        prof: dict[int, int] = {}
        for e in self.other_labels:
            d = self.lobe_dist[self.delta][e]
            prof[d] = prof.get(d, 0) + 1
        below = [0] * (r + 1)  # vertices within t below a non-root vertex, itself included
        for t in range(r + 1):
            below[t] = 1 + (self.m - 1) * sum(c * below[t - d] for d, c in prof.items() if d <= t)
        return 1 + self.m * sum(c * below[r - d] for d, c in prof.items() if d <= r)

    def ball(self, r: int) -> "Ball":
        if r < 0:
            raise InputError("radius must be non-negative")
        projected = self.projected_size(r)
        cap = max_vertices()
        if projected > cap:
            raise CapacityError(f"ball of radius {r} has {projected} vertices (cap {cap})", projected)
        depth = {VertexId(): 0}
        stack = [VertexId()]
        while stack:
            v = stack.pop()
            for lobe in self.child_lobes(v):
                for e in self.other_labels:
                    d = depth[v] + self.lobe_dist[self.delta][e]
                    if d <= r:
                        w = v.child(lobe.index, e)
                        depth[w] = d
                        stack.append(w)
        arcs, tags, lobes = [], {}, {}
        for v in depth:
            for lobe in self.child_lobes(v):
                mem = self.members(lobe)
                inside = {e: w for e, w in mem if w in depth}
                lobes[lobe] = (frozenset(w for _, w in mem), len(inside) == len(mem))
                for a, b in self.lam.arcs:
                    if a in inside and b in inside:
                        arc = (inside[a], inside[b])
                        arcs.append(arc)
                        tags[arc] = lobe
        return Ball.build(VertexId(), r, depth, arcs, tags, lobes)


@dataclass(frozen=True)
class Ball:
    root: VertexId
    radius: int
    vertices: tuple[VertexId, ...]
    depth: dict
    arcs: tuple[tuple[VertexId, VertexId], ...]
    lobe_tags: dict = field(default_factory=dict)
    # lobe -> (member set, complete-in-ball flag); empty when lobes are unknown
    lobes: dict = field(default_factory=dict)

    @classmethod
    def build(cls, root, radius, depth, arcs, tags, lobes):
        verts = tuple(sorted(depth, key=lambda v: (depth[v], v)))
        return cls(root, radius, verts, dict(depth), tuple(sorted(set(arcs))), dict(tags), dict(lobes))

    def sphere(self, r: int) -> list[VertexId]:
        return [v for v in self.vertices if self.depth[v] == r]

    def sphere_sizes(self) -> list[int]:
        sizes = [0] * (self.radius + 1)
        for v in self.vertices:
            sizes[self.depth[v]] += 1
        return sizes

    def arc_set(self) -> frozenset:
        return frozenset(self.arcs)

    def undirected_adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for u, w in self.arcs:
            adj[u].add(w)
            adj[w].add(u)
        return adj

    def complete_lobes(self) -> dict:
        return {lobe: mem for lobe, (mem, full) in self.lobes.items() if full}


def expand_ball(amalgam: ValidatedAmalgam, r: int, lambda_arc=None) -> Ball:
    return LobeGraph(amalgam, lambda_arc).ball(r)


def neighbors(amalgam: ValidatedAmalgam, v: VertexId, lambda_arc=None) -> list[tuple[VertexId, str]]:
    amalgam.check_address(v)
    return LobeGraph(amalgam, lambda_arc).neighbors(v)


class OrbitalHandle:
    """The orbital digraph ``(Omega, (alpha, beta)^G)``, normalised so ``alpha`` is the root."""

    def __init__(self, amalgam: ValidatedAmalgam, beta: VertexId, alpha: VertexId | None = None):
        amalgam.check_address(beta)
        if alpha is not None:
            amalgam.check_address(alpha)
            if alpha == beta:
                raise InputError("diagonal orbital digraphs are not represented (alpha == beta)")
            if not alpha.is_root:
                y = amalgam.vertex_element(alpha)
                y_inv = [(s, amalgam.inverse_index(s, f)) for s, f in reversed(amalgam.letters_of(y))]
                beta = amalgam.act_letters(y_inv, beta)
        if beta.is_root:
            raise InputError("diagonal orbital digraphs are not represented (alpha == beta)")
        self.amalgam = amalgam
        self.alpha = VertexId()
        self.beta = beta
        self.span = tree_distance(self.alpha, beta)
        a_letters = [[(SIDE_A, i)] for i in range(len(amalgam.A_elems))]
        self._out = sorted({amalgam.act_letters(a, beta) for a in a_letters})
        b = amalgam.letters_of(amalgam.vertex_element(beta))
        b_inv = [(s, amalgam.inverse_index(s, f)) for s, f in reversed(b)]
        back = amalgam.act_letters(b_inv, VertexId())
        self._in = sorted({amalgam.act_letters(a, back) for a in a_letters})
        self._cache: dict = {}

    def __repr__(self) -> str:
        return f"OrbitalHandle(beta={str(self.beta)!r}, span={self.span})"

    @property
    def lobe_arc(self) -> tuple[int, int] | None:
        """For span-2 handles, the arc of the lobe digraph in root-lobe labels."""
        if self.span != 2:
            return None
        return (self.amalgam.delta, self.beta.steps[0][1])

    def out_neighbors(self, v: VertexId) -> list[VertexId]:
        return self._adjacent(v)[0]

    def in_neighbors(self, v: VertexId) -> list[VertexId]:
        return self._adjacent(v)[1]

    def _adjacent(self, v):
        hit = self._cache.get(v)
        if hit is None:
            am = self.amalgam
            y = am.vertex_letters(v)
            hit = (
                sorted({am.act_letters(y, w) for w in self._out}),
                sorted({am.act_letters(y, w) for w in self._in}),
            )
            if len(self._cache) < 200_000:
                self._cache[v] = hit
        return hit

    def neighbors(self, v: VertexId) -> list[tuple[VertexId, str]]:
        outs, ins = self._adjacent(v)
        both = set(outs) & set(ins)
        res = [(w, "both" if w in both else "out") for w in outs]
        res += [(w, "in") for w in ins if w not in both]
        return sorted(res)

    @property
    def confined(self) -> bool:
        """True when ``beta`` shares the root's retraction block.

        Every arc then stays inside one block, so the digraph is disconnected.
        """
        return self.amalgam.block_label(self.beta) == self.amalgam.delta

    def distance(self, u: VertexId, w: VertexId, limit: int, budget: int | None = None) -> int | None:
        """Exact undirected distance by lazy BFS, or ``None`` if it exceeds ``limit``.

        Visiting more than ``budget`` vertices (default: the vertex cap) raises
        CapacityError.
        """
        if u == w:
            return 0
        cap = max_vertices() if budget is None else budget
        seen = {u}
        frontier = [u]
        for d in range(1, limit + 1):
            nxt = []
            for x in frontier:
                outs, ins = self._adjacent(x)
                for y in outs + ins:
                    if y == w:
                        return d
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            if len(seen) > cap:
                raise CapacityError(f"distance search exceeded {cap} vertices", len(seen))
            frontier = nxt
        return None

    def ball(self, r: int) -> Ball:
        if r < 0:
            raise InputError("radius must be non-negative")
        cap = max_vertices()
        depth = {self.alpha: 0}
        frontier = [self.alpha]
        for d in range(1, r + 1):
            nxt = []
            for v in frontier:
                outs, ins = self._adjacent(v)
                for w in outs + ins:
                    if w not in depth:
                        depth[w] = d
                        nxt.append(w)
                        if len(depth) > cap:
                            raise CapacityError(
                                f"orbital ball of radius {r} exceeds {cap} vertices", len(depth)
                            )
            frontier = nxt
        arcs, tags, lobes = [], {}, {}
        for v in depth:
            for w in self._adjacent(v)[0]:
                if w in depth:
                    arcs.append((v, w))
                    if self.span == 2:
                        tags[(v, w)] = lobe_between(v, w)
        if self.span == 2:
            lg = LobeGraph(self.amalgam, self.lobe_arc)
            for v in depth:
                for lobe in lg.child_lobes(v):
                    mem = frozenset(w for _, w in lg.members(lobe))
                    if any(w in depth and w != v for w in mem):
                        lobes[lobe] = (mem, all(w in depth for w in mem))
        return Ball.build(self.alpha, r, depth, arcs, tags, lobes)


def orbital_ball(handle: OrbitalHandle, r: int) -> Ball:
    return handle.ball(r)


@dataclass(frozen=True)
class SuborbitReport:
    orbits: tuple[tuple[tuple[VertexId, ...], ...], ...]  # radius -> orbits

    @property
    def subdegrees(self) -> list[list[int]]:
        return [[len(o) for o in level] for level in self.orbits]

    def flat(self) -> list[int]:
        return [s for level in self.subdegrees for s in level]


def _source_ball(source, r: int) -> Ball:
    if isinstance(source, OrbitalHandle):
        return source.ball(r)
    if isinstance(source, LobeGraph):
        return source.ball(r)
    return expand_ball(source, r)


def _source_amalgam(source) -> ValidatedAmalgam:
    return source.amalgam if isinstance(source, (OrbitalHandle, LobeGraph)) else source


def suborbits(source, rmax: int) -> SuborbitReport:
    """Partition each sphere around the root into orbits of the root stabiliser ``A``."""
    am = _source_amalgam(source)
    ball = _source_ball(source, rmax)
    gens = [[(SIDE_A, am.index_of(SIDE_A, g))] for g in am.spec.A.generators]
    levels = []
    for r in range(rmax + 1):
        sphere = ball.sphere(r)
        remaining = set(sphere)
        level = []
        for v in sphere:  # spheres are already in address order
            if v not in remaining:
                continue
            orb = {v}
            queue = deque([v])
            while queue:
                x = queue.popleft()
                for g in gens:
                    y = am.act_letters(g, x)
                    if y not in orb:
                        orb.add(y)
                        queue.append(y)
            remaining -= orb
            level.append(tuple(sorted(orb)))
        levels.append(tuple(level))
    return SuborbitReport(tuple(levels))


def ball_to_json(ball: Ball) -> str:
    doc = {
        "root": str(ball.root),
        "radius": ball.radius,
        "vertices": [{"address": str(v), "depth": ball.depth[v]} for v in ball.vertices],
        "arcs": [
            {
                "from": str(u),
                "to": str(w),
                "lobe": str(ball.lobe_tags[(u, w)]) if ball.lobe_tags.get((u, w)) else None,
            }
            for u, w in ball.arcs
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


_PALETTE = ("black", "red", "blue", "darkgreen", "orange", "purple", "brown", "teal")


def ball_to_dot(ball: Ball, name: str = "ball") -> str:
    order = {v: k for k, v in enumerate(ball.vertices)}
    lobe_order: dict = {}
    lines = [f"digraph {name} {{"]
    for v in ball.vertices:
        lines.append(f'  n{order[v]} [label="{v}" depth={ball.depth[v]}];')
    for u, w in ball.arcs:
        lobe = ball.lobe_tags.get((u, w))
        if lobe is None:
            lines.append(f"  n{order[u]} -> n{order[w]};")
            continue
        idx = lobe_order.setdefault(lobe, len(lobe_order))
        colour = _PALETTE[idx % len(_PALETTE)]
        lines.append(f'  n{order[u]} -> n{order[w]} [label="{lobe}" color={colour}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def iter_tree_ball(amalgam: ValidatedAmalgam, radius: int) -> Iterable:
    """Nodes of the block-cut-vertex tree within tree distance ``radius`` of the root."""
    lg_m = amalgam.m
    labels = [e for e in amalgam.labels if e != amalgam.delta]
    level = [VertexId()]
    yield VertexId()
    dist = 0
    while level:
        nxt = []
        for v in level:
            start = 0 if v.is_root else 1
            for i in range(start, lg_m):
                if dist + 1 <= radius:
                    yield LobeId(v, i)
                if dist + 2 <= radius:
                    for e in labels:
                        w = v.child(i, e)
                        yield w
                        nxt.append(w)
        level = nxt
        dist += 2
