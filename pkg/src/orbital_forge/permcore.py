"""Finite permutation groups acting on the right of ``{0, ..., n-1}``.

Permutations compose left to right: ``(p * q)(i) == q(p(i))``, so the image of
a point under ``p * q`` is obtained by applying ``p`` first.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import CapacityError, InputError, PreconditionError

ENUMERATION_CAP = 10**6

__all__ = [
    "Permutation",
    "FiniteGroup",
    "FiniteDigraph",
    "parse_permutation",
    "orbit",
    "point_stabilizer",
    "setwise_stabilizer",
    "pointwise_stabilizer",
    "is_transitive",
    "is_primitive",
    "is_regular",
    "orbital_digraphs",
    "minimal_block",
]


@dataclass(frozen=True, order=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise InputError(f"not a permutation: {list(images)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, degree: int) -> Permutation:
        return cls(tuple(range(degree)))

    @classmethod
    def from_cycles(cls, degree: int, cycles: Iterable[Sequence[int]]) -> Permutation:
        images = list(range(degree))
        seen = set()
        for cycle in cycles:
            for i, pt in enumerate(cycle):
                if not 0 <= pt < degree:
                    raise InputError(f"point {pt} outside 0..{degree - 1}")
                if pt in seen:
                    raise InputError(f"point {pt} repeated in cycle notation")
                seen.add(pt)
                images[pt] = cycle[(i + 1) % len(cycle)]
        return cls(tuple(images))

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, point: int) -> int:
        return self.images[point]

    def __mul__(self, other: Permutation) -> Permutation:
        if other.degree != self.degree:
            raise InputError("degree mismatch in permutation product")
        q = other.images
        return Permutation(tuple(q[i] for i in self.images))

    def inverse(self) -> Permutation:
        inv = [0] * self.degree
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def cycles(self) -> list[tuple[int, ...]]:
        seen, out = set(), []
        for start in range(self.degree):
            if start in seen or self.images[start] == start:
                continue
            cyc = [start]
            seen.add(start)
            nxt = self.images[start]
            while nxt != start:
                cyc.append(nxt)
                seen.add(nxt)
                nxt = self.images[nxt]
            out.append(tuple(cyc))
        return out

    def cycle_string(self) -> str:
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc)

    def __str__(self) -> str:
        return "[" + ",".join(map(str, self.images)) + "]"


_CYCLE_RE = re.compile(r"\(\s*(\d+(?:[\s,]+\d+)*)?\s*\)")


def parse_permutation(text: str, degree: int) -> Permutation:
    """Parse ``"(0 1 2)(3 4)"``, ``"()"`` or an image list ``"[1,2,0]"``."""
    s = text.strip()
    if s.startswith("["):
        if not s.endswith("]"):
            raise InputError(f"unterminated image list {text!r}")
        body = s[1:-1].strip()
        try:
            images = tuple(int(tok) for tok in body.split(",")) if body else ()
        except ValueError:
            raise InputError(f"bad image list {text!r}") from None
        if len(images) != degree:
            raise InputError(f"image list {text!r} has length {len(images)}, expected {degree}")
        return Permutation(images)
    pos, cycles = 0, []
    while pos < len(s):
        if s[pos].isspace():
            pos += 1
            continue
        m = _CYCLE_RE.match(s, pos)
        if m is None:
            raise InputError(f"malformed cycle notation {text!r}")
        if m.group(1):
            cycles.append([int(t) for t in re.split(r"[\s,]+", m.group(1).strip())])
        pos = m.end()
    if not s:
        raise InputError("empty permutation")
    return Permutation.from_cycles(degree, cycles)


@dataclass(frozen=True)
class FiniteGroup:
    degree: int
    generators: tuple[Permutation, ...] = field(default=())

    def __post_init__(self):
        gens = tuple(self.generators)
        for g in gens:
            if g.degree != self.degree:
                raise InputError(f"generator {g} has degree {g.degree}, expected {self.degree}")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_cycles(cls, degree: int, *cycle_strings: str) -> FiniteGroup:
        return cls(degree, tuple(parse_permutation(c, degree) for c in cycle_strings))

    @property
    def identity(self) -> Permutation:
        return Permutation.identity(self.degree)

    @cached_property
    def elements(self) -> tuple[Permutation, ...]:
        """All elements in BFS order from the identity; identity first."""
        ident = self.identity
        seen = {ident}
        out = [ident]
        queue = deque([ident])
        while queue:
            x = queue.popleft()
            for g in self.generators:
                y = x * g
                if y not in seen:
                    if len(seen) >= ENUMERATION_CAP:
                        raise CapacityError(
                            f"group order exceeds enumeration cap {ENUMERATION_CAP}",
                            projected=None,
                        )
                    seen.add(y)
                    out.append(y)
                    queue.append(y)
        return tuple(out)

    @cached_property
    def element_set(self) -> frozenset[Permutation]:
        return frozenset(self.elements)

    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, perm: Permutation) -> bool:
        return perm in self.element_set

    def is_trivial(self) -> bool:
        return all(g.is_identity() for g in self.generators)

    def same_elements(self, other: FiniteGroup) -> bool:
        return self.degree == other.degree and self.element_set == other.element_set


@dataclass(frozen=True)
class FiniteDigraph:
    """Loop-free digraph on ``0..n-1`` with a set of arcs."""

    n: int
    arcs: frozenset[tuple[int, int]]

    def __post_init__(self):
        arcs = frozenset((int(u), int(v)) for u, v in self.arcs)
        for u, v in arcs:
            if u == v:
                raise InputError(f"loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InputError(f"arc {(u, v)} outside vertex range")
        object.__setattr__(self, "arcs", arcs)

    def sorted_arcs(self) -> list[tuple[int, int]]:
        return sorted(self.arcs)

    def adjacency(self) -> list[set[int]]:
        """Undirected adjacency of the underlying graph."""
        adj = [set() for _ in range(self.n)]
        for u, v in self.arcs:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def distances_from(self, source: int) -> dict[int, int]:
        adj = self.adjacency()
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def is_connected(self) -> bool:
        return self.n == 0 or len(self.distances_from(0)) == self.n

    def diameter(self) -> int:
        if not self.is_connected():
            raise PreconditionError("diameter of a disconnected digraph")
        return max((max(self.distances_from(s).values()) for s in range(self.n)), default=0)

    def out_neighbors(self, u: int) -> list[int]:
        return sorted(v for a, v in self.arcs if a == u)

    def in_neighbors(self, u: int) -> list[int]:
        return sorted(a for a, v in self.arcs if v == u)

    def is_isomorphic(self, other: FiniteDigraph) -> bool:
        """Brute-force isomorphism test with degree-signature pruning."""
        if self.n != other.n or len(self.arcs) != len(other.arcs):
            return False

        def signature(d):
            outd, ind = [0] * d.n, [0] * d.n
            for u, v in d.arcs:
                outd[u] += 1
                ind[v] += 1
            return [(outd[i], ind[i]) for i in range(d.n)]

        sig_a, sig_b = signature(self), signature(other)
        if sorted(sig_a) != sorted(sig_b):
            return False
        candidates = [[j for j in range(other.n) if sig_b[j] == sig_a[i]] for i in range(self.n)]
        arcs_a = self.arcs
        arcs_b = other.arcs
        mapping = [-1] * self.n
        used = [False] * other.n

        def extend(i):
            if i == self.n:
                return True
            for j in candidates[i]:
                if used[j]:
                    continue
                mapping[i] = j
                ok = True
                for k in range(i):
                    if ((k, i) in arcs_a) != ((mapping[k], j) in arcs_b) or (
                        (i, k) in arcs_a
                    ) != ((j, mapping[k]) in arcs_b):
                        ok = False
                        break
                if ok:
                    used[j] = True
                    if extend(i + 1):
                        return True
                    used[j] = False
            mapping[i] = -1
            return False

        return extend(0)


def _check_point(group: FiniteGroup, point: int) -> None:
    if not 0 <= point < group.degree:
        raise InputError(f"point {point} outside 0..{group.degree - 1}")


def _orbit_transversal(group: FiniteGroup, point: int) -> dict[int, Permutation]:
    transversal = {point: group.identity}
    queue = deque([point])
    while queue:
        x = queue.popleft()
        for g in group.generators:
            y = g(x)
            if y not in transversal:
                transversal[y] = transversal[x] * g
                queue.append(y)
    return transversal


def orbit(group: FiniteGroup, point: int) -> set[int]:
    _check_point(group, point)
    return set(_orbit_transversal(group, point))


def is_transitive(group: FiniteGroup) -> bool:
    return group.degree <= 1 or len(orbit(group, 0)) == group.degree


def point_stabilizer(group: FiniteGroup, point: int) -> FiniteGroup:
    """Stabiliser of ``point`` generated by its deduplicated Schreier generators."""
    _check_point(group, point)
    transversal = _orbit_transversal(group, point)
    gens = set()
    for x, u in transversal.items():
        for g in group.generators:
            s = u * g * transversal[g(x)].inverse()
            if not s.is_identity():
                gens.add(s)
    return FiniteGroup(group.degree, tuple(sorted(gens)))


def _subgroup_by_filter(group: FiniteGroup, keep) -> FiniteGroup:
    members = [g for g in group.elements if keep(g)]
    # Sub-enumerating a subgroup from its full element list is safe: BFS over
    # all members as generators reproduces exactly this set.
    gens = tuple(sorted(g for g in members if not g.is_identity()))
    sub = FiniteGroup(group.degree, gens)
    sub.__dict__["elements"] = tuple(members)
    return sub


def setwise_stabilizer(group: FiniteGroup, subset: Iterable[int]) -> FiniteGroup:
    sigma = frozenset(subset)
    for pt in sigma:
        _check_point(group, pt)
    return _subgroup_by_filter(group, lambda g: frozenset(g(p) for p in sigma) == sigma)


def pointwise_stabilizer(group: FiniteGroup, subset: Iterable[int]) -> FiniteGroup:
    sigma = tuple(subset)
    for pt in sigma:
        _check_point(group, pt)
    return _subgroup_by_filter(group, lambda g: all(g(p) == p for p in sigma))


def minimal_block(group: FiniteGroup, a: int, b: int) -> frozenset[int]:
    """Smallest block of imprimitivity containing both ``a`` and ``b``."""
    parent = list(range(group.degree))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pending = [(a, b)]
    parent[find(b)] = find(a)
    while pending:
        x, y = pending.pop()
        for g in group.generators:
            rx, ry = find(g(x)), find(g(y))
            if rx != ry:
                parent[ry] = rx
                pending.append((g(x), g(y)))
    root = find(a)
    return frozenset(p for p in range(group.degree) if find(p) == root)


def is_primitive(group: FiniteGroup, return_witness: bool = False):
    """Whether a transitive group preserves no non-trivial block system.

    With ``return_witness=True`` returns ``(flag, block)`` where ``block`` is the
    first proper non-trivial minimal block containing ``{0, i}``, or ``None``.
    """
    if not is_transitive(group):
        raise PreconditionError("primitivity is only defined for transitive groups")
    witness = None
    for i in range(1, group.degree):
        block = minimal_block(group, 0, i)
        if len(block) < group.degree:
            witness = block
            break
    flag = witness is None
    return (flag, witness) if return_witness else flag


def is_regular(group: FiniteGroup) -> bool:
    if not is_transitive(group):
        raise PreconditionError("regularity is only defined for transitive groups")
    if group.degree == 0:
        return True
    return point_stabilizer(group, 0).is_trivial()


def orbital_digraphs(group: FiniteGroup) -> list[FiniteDigraph]:
    """One digraph per orbit of the group on ordered pairs of distinct points.

    Ordered by least arc. Works for intransitive groups too.
    """
    n = group.degree
    seen: set[tuple[int, int]] = set()
    out = []
    for u in range(n):
        for v in range(n):
            if u == v or (u, v) in seen:
                continue
            arcs = {(u, v)}
            queue = deque([(u, v)])
            while queue:
                x, y = queue.popleft()
                for g in group.generators:
                    img = (g(x), g(y))
                    if img not in arcs:
                        arcs.add(img)
                        queue.append(img)
            seen |= arcs
            out.append(FiniteDigraph(n, frozenset(arcs)))
    return out
