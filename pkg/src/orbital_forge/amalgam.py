"""The amalgamated free product ``G = A *_H P`` and its action on ``Omega = G/A``.

``P`` is the lobe group acting on ``Delta`` with base point ``delta``;
``H = P_delta`` is identified with a subgroup of the vertex group ``A`` through
an injective homomorphism. Elements are kept in the normal form

    h * x_1 * x_2 * ... * x_k

with ``h`` in ``H`` and the ``x_i`` non-identity right-coset representatives
(``H x``) alternating between ``A`` and ``P``. Vertices of ``Omega`` are right
cosets ``A g`` and carry the canonical address defined in ``graphengine``.
"""
from __future__ import annotations

import hashlib
import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import InputError, ValidationError
from .permcore import (
    FiniteDigraph,
    FiniteGroup,
    Permutation,
    is_primitive,
    is_regular,
    is_transitive,
    point_stabilizer,
)

SIDE_A, SIDE_P = 0, 1
SIDE_NAMES = ("A", "P")

__all__ = [
    "AmalgamSpec",
    "ValidatedAmalgam",
    "NormalForm",
    "GroupWord",
    "VertexId",
    "validate",
    "normal_form",
    "multiply",
    "invert",
    "equal",
    "act_on_vertex",
]


@dataclass(frozen=True)
class AmalgamSpec:
    P: FiniteGroup
    delta: int
    A: FiniteGroup
    embedding: tuple[tuple[Permutation, Permutation], ...]
    lambda_arc: tuple[int, int]

    @property
    def H(self) -> FiniteGroup:
        return FiniteGroup(self.P.degree, tuple(h for h, _ in self.embedding))

    def digest(self) -> str:
        parts = [
            "P", str(self.P.degree), *map(str, self.P.generators),
            "delta", str(self.delta),
            "A", str(self.A.degree), *map(str, self.A.generators),
            "emb", *(f"{h}->{a}" for h, a in self.embedding),
            "arc", *map(str, self.lambda_arc),
        ]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()


@dataclass(frozen=True, order=True)
class VertexId:
    """Canonical address of a vertex: ``(lobe_choice, in_lobe_label)`` steps from the root."""

    steps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((int(i), int(e)) for i, e in self.steps))

    @classmethod
    def parse(cls, text: str) -> VertexId:
        text = text.strip()
        if text in ("", "root"):
            return cls(())
        steps = []
        for chunk in text.split("/"):
            try:
                lobe, vert = chunk.split(".")
                if not (lobe.startswith("l") and vert.startswith("v")):
                    raise ValueError
                steps.append((int(lobe[1:]), int(vert[1:])))
            except ValueError:
                raise InputError(f"malformed vertex address {text!r}") from None
        return cls(tuple(steps))

    @property
    def is_root(self) -> bool:
        return not self.steps

    @property
    def parent(self) -> VertexId:
        return VertexId(self.steps[:-1])

    def child(self, lobe: int, label: int) -> VertexId:
        return VertexId(self.steps + ((lobe, label),))

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return "/".join(f"l{i}.v{e}" for i, e in self.steps)


@dataclass(frozen=True)
class NormalForm:
    amalgam_digest: str
    head: int  # index into the P element list; lies in H
    syllables: tuple[tuple[int, int], ...]  # (side, transversal slot), slot 0 never used
    _amalgam: "ValidatedAmalgam" = field(compare=False, repr=False, hash=False, default=None)

    @property
    def head_permutation(self) -> Permutation:
        return self._amalgam.P_elems[self.head]

    def is_identity(self) -> bool:
        return not self.syllables and self.head == self._amalgam.p_id

    def __str__(self) -> str:
        syl = " ".join(f"{SIDE_NAMES[s]}:{k}" for s, k in self.syllables)
        return f"{self.head_permutation} | {syl}".rstrip()


@dataclass(frozen=True)
class GroupWord:
    """Free word in the two factors: a sequence of ``("A" | "P", Permutation)``."""

    letters: tuple[tuple[str, Permutation], ...] = ()

    def __post_init__(self):
        letters = tuple((str(f).upper(), p) for f, p in self.letters)
        for f, _ in letters:
            if f not in SIDE_NAMES:
                raise InputError(f"unknown factor {f!r}")
        object.__setattr__(self, "letters", letters)


class ValidatedAmalgam:
    """Validated amalgam with precomputed element tables and transversals."""

    def __init__(self, spec: AmalgamSpec, *, check: bool = True):
        self.spec = spec
        if check:
            _run_validation(spec)
        P, A = spec.P, spec.A
        self.delta = spec.delta
        self.P_elems = P.elements
        self.A_elems = A.elements
        self._index = ({g: i for i, g in enumerate(self.A_elems)},
                       {g: i for i, g in enumerate(self.P_elems)})
        self.p_id = self._index[SIDE_P][P.identity]
        self.a_id = self._index[SIDE_A][A.identity]
        self._elems = (self.A_elems, self.P_elems)
        self._mul_cache = ({}, {})

        hom = _extend_embedding(spec)
        self.phi = {self._index[SIDE_P][h]: self._index[SIDE_A][a] for h, a in hom.items()}
        self.phi_inv = {a: h for h, a in self.phi.items()}
        self.H_P = sorted(self.phi)

        self.reps = ([], [])
        self.dec = ({}, {})
        self._build_transversal(SIDE_P)
        self._build_transversal(SIDE_A)
        self.m = len(self.reps[SIDE_A])
        self.labels = [self.P_elems[r](self.delta) for r in self.reps[SIDE_P]]
        self.slot_of_label = {lab: k for k, lab in enumerate(self.labels)}
        self.lambda_digraph = _orbital_digraph_of(P, spec.lambda_arc)
        self.digest = spec.digest()

    # --- element arithmetic on indices -------------------------------------

    def mul(self, side: int, i: int, j: int) -> int:
        cache = self._mul_cache[side]
        key = (i, j)
        r = cache.get(key)
        if r is None:
            elems = self._elems[side]
            r = self._index[side][elems[i] * elems[j]]
            cache[key] = r
        return r

    def index_of(self, side: int, perm: Permutation) -> int:
        try:
            return self._index[side][perm]
        except KeyError:
            raise InputError(f"{perm} is not an element of {SIDE_NAMES[side]}") from None

    def inverse_index(self, side: int, i: int) -> int:
        return self._index[side][self._elems[side][i].inverse()]

    def _h_on(self, side: int, h: int) -> int:
        return self.phi[h] if side == SIDE_A else h

    def _build_transversal(self, side: int) -> None:
        elems = self._elems[side]
        h_side = [self._h_on(side, h) for h in self.H_P]
        order = sorted(range(len(elems)), key=lambda i: elems[i].images)
        dec, reps = self.dec[side], self.reps[side]
        for x in order:
            if x in dec:
                continue
            slot = len(reps)
            reps.append(x)
            for h_p, h_s in zip(self.H_P, h_side):
                dec[self.mul(side, h_s, x)] = (h_p, slot)

    # --- normal-form machinery ---------------------------------------------

    def _absorb(self, syls: list, h: int) -> int:
        """Rewrite ``syls * h`` as ``h' * syls'`` in place; return ``h'``."""
        for pos in range(len(syls) - 1, -1, -1):
            if h == self.p_id:
                return h
            side, slot = syls[pos]
            prod = self.mul(side, self.reps[side][slot], self._h_on(side, h))
            h, new_slot = self.dec[side][prod]
            syls[pos] = (side, new_slot)
        return h

    def _push(self, head: int, syls: list, side: int, f: int) -> int:
        """Right-multiply ``head * syls`` by the factor element ``f``; returns new head."""
        if syls and syls[-1][0] == side:
            _, slot = syls.pop()
            f = self.mul(side, self.reps[side][slot], f)
        h1, slot = self.dec[side][f]
        head = self.mul(SIDE_P, head, self._absorb(syls, h1))
        if slot != 0:
            syls.append((side, slot))
        return head

    def letters_of(self, x: NormalForm) -> list[tuple[int, int]]:
        out = [(SIDE_P, x.head)] if x.head != self.p_id else []
        out.extend((s, self.reps[s][k]) for s, k in x.syllables)
        return out

    def make(self, head: int, syls: Iterable) -> NormalForm:
        return NormalForm(self.digest, head, tuple(syls), self)

    @cached_property
    def identity(self) -> NormalForm:
        return self.make(self.p_id, ())

    def from_letters(self, letters: Iterable[tuple[int, int]], start: NormalForm | None = None):
        head = self.p_id if start is None else start.head
        syls = [] if start is None else list(start.syllables)
        for side, f in letters:
            head = self._push(head, syls, side, f)
        return self.make(head, syls)

    def element(self, factor: str, perm: Permutation) -> NormalForm:
        side = SIDE_NAMES.index(factor.upper())
        return self.from_letters([(side, self.index_of(side, perm))])

    # --- vertex addresses ----------------------------------------------------

    def check_address(self, v: VertexId) -> None:
        for pos, (i, e) in enumerate(v.steps):
            lo = 0 if pos == 0 else 1
            if not lo <= i < self.m:
                raise InputError(f"address {v}: lobe choice {i} outside {lo}..{self.m - 1}")
            if e == self.delta or e not in self.slot_of_label:
                raise InputError(f"address {v}: in-lobe label {e} invalid")

    def address_syllables(self, v: VertexId) -> list[tuple[int, int]]:
        syls = []
        for pos in range(len(v.steps) - 1, -1, -1):
            i, e = v.steps[pos]
            syls.append((SIDE_P, self.slot_of_label[e]))
            if i != 0:
                syls.append((SIDE_A, i))
        return syls

    def syllables_address(self, syls: Sequence[tuple[int, int]]) -> VertexId:
        syls = list(syls)
        if syls and syls[0][0] == SIDE_A:
            syls = syls[1:]
        steps = []
        pos = len(syls) - 1
        while pos >= 0:
            if syls[pos][0] == SIDE_A:
                i = syls[pos][1]
                pos -= 1
            else:
                i = 0
            steps.append((i, self.labels[syls[pos][1]]))
            pos -= 1
        return VertexId(tuple(steps))

    def vertex_letters(self, v: VertexId) -> list[tuple[int, int]]:
        """Letters of the canonical element mapping the root to ``v``."""
        return [(s, self.reps[s][k]) for s, k in self.address_syllables(v)]

    def vertex_element(self, v: VertexId) -> NormalForm:
        self.check_address(v)
        return self.make(self.p_id, self.address_syllables(v))

    @cached_property
    def retraction(self) -> dict[int, int] | None:
        """A homomorphism ``A -> H`` (A-index to P-index) fixing ``H``, if one exists.

        Together with the identity on ``P`` it defines ``theta: G -> P`` with
        ``theta(A) = H``, whose fibres split the vertices into ``|Delta|`` blocks.
        Only searched while ``|H|^(#generators of A)`` stays below ``10**5``.
        """
        gens = [self.index_of(SIDE_A, a) for a in self.spec.A.generators]
        if len(self.H_P) ** len(gens) > 10**5:
            return None
        for images in itertools.product(self.H_P, repeat=len(gens)):
            rho, queue, ok = {self.a_id: self.p_id}, deque([self.a_id]), True
            while queue and ok:
                x = queue.popleft()
                for g, im in zip(gens, images):
                    y, b = self.mul(SIDE_A, x, g), self.mul(SIDE_P, rho[x], im)
                    known = rho.get(y)
                    if known is None:
                        rho[y] = b
                        queue.append(y)
                    elif known != b:
                        ok = False
                        break
            if ok and all(rho[a] == h for h, a in self.phi.items()):
                return rho
        return None

    def block_label(self, v: VertexId) -> int | None:
        """Point ``delta^theta(g)`` for ``root^g = v``; ``None`` without a retraction."""
        rho = self.retraction
        if rho is None:
            return None
        point = self.delta
        for side, i in self.vertex_letters(v):
            point = self.P_elems[rho[i] if side == SIDE_A else i](point)
        return point

    def act_letters(self, letters: Sequence[tuple[int, int]], v: VertexId) -> VertexId:
        syls = self.address_syllables(v)
        head = self.p_id
        for side, f in letters:
            head = self._push(head, syls, side, f)
        return self.syllables_address(syls)


def _extend_embedding(spec: AmalgamSpec) -> dict[Permutation, Permutation]:
    """Extend generator images to all of ``H``; raise if not a homomorphism."""
    gens = list(spec.embedding)
    ident_p, ident_a = spec.P.identity, spec.A.identity
    image = {ident_p: ident_a}
    queue = deque([ident_p])
    while queue:
        x = queue.popleft()
        for h, a in gens:
            y, b = x * h, image[x] * a
            known = image.get(y)
            if known is None:
                image[y] = b
                queue.append(y)
            elif known != b:
                raise ValidationError(
                    "NOT_HOMOMORPHIC", "embedding is not a homomorphism", witness=(str(x), str(h))
                )
    return image


def _orbital_digraph_of(group: FiniteGroup, arc: tuple[int, int]) -> FiniteDigraph:
    u, v = arc
    arcs = {(u, v)}
    queue = deque([(u, v)])
    while queue:
        x, y = queue.popleft()
        for g in group.generators:
            img = (g(x), g(y))
            if img not in arcs:
                arcs.add(img)
                queue.append(img)
    return FiniteDigraph(group.degree, frozenset(arcs))


def _run_validation(spec: AmalgamSpec) -> None:
    P, A, delta = spec.P, spec.A, spec.delta
    n = P.degree
    if not 0 <= delta < n:
        raise ValidationError("BAD_BASE_POINT", f"base point {delta} outside 0..{n - 1}")
    d0, d1 = spec.lambda_arc
    if not (0 <= d0 < n and 0 <= d1 < n):
        raise ValidationError("BAD_ARC", f"lambda arc {spec.lambda_arc} outside 0..{n - 1}")
    if d0 != delta:
        raise ValidationError("BAD_ARC", f"lambda arc must start at the base point {delta}")
    if d1 == delta:
        raise ValidationError("DEGENERATE_ARC", "lambda arc is diagonal (delta' = delta)")
    if n < 3:
        raise ValidationError("LOBE_TOO_SMALL", f"lobe has {n} < 3 vertices")
    if not is_transitive(P):
        raise ValidationError("LOBE_INTRANSITIVE", "lobe group intransitive")
    prim, block = is_primitive(P, return_witness=True)
    if not prim:
        raise ValidationError("LOBE_IMPRIMITIVE", "lobe group imprimitive", witness=sorted(block))
    if is_regular(P):
        raise ValidationError("LOBE_REGULAR", "lobe group regular")
    for h, a in spec.embedding:
        if h.degree != n or a.degree != A.degree:
            raise ValidationError("H_MISMATCH", "embedding pair has wrong degree")
        if h not in P:
            raise ValidationError("H_MISMATCH", f"H generator {h.cycle_string()} not in P")
        if a not in A:
            raise ValidationError("NOT_HOMOMORPHIC", f"embedding image {a.cycle_string()} not in A")
    if not spec.H.same_elements(point_stabilizer(P, delta)):
        raise ValidationError("H_MISMATCH", "H differs from the stabiliser of delta in P")
    image = _extend_embedding(spec)
    if len(set(image.values())) != len(image):
        raise ValidationError("NOT_INJECTIVE", "embedding is not injective")
    index = A.order() // len(image)
    if index < 2:
        raise ValidationError("INDEX_TOO_SMALL", f"[A:H] = {index} < 2")


def validate(spec: AmalgamSpec) -> ValidatedAmalgam:
    return ValidatedAmalgam(spec, check=True)


def _same(x: NormalForm, amalgam: ValidatedAmalgam) -> None:
    if x.amalgam_digest != amalgam.digest:
        raise InputError("normal form belongs to a different amalgam")


def normal_form(word: GroupWord, amalgam: ValidatedAmalgam) -> NormalForm:
    letters = []
    for factor, perm in word.letters:
        side = SIDE_NAMES.index(factor)
        letters.append((side, amalgam.index_of(side, perm)))
    return amalgam.from_letters(letters)


def multiply(x: NormalForm, y: NormalForm) -> NormalForm:
    if x.amalgam_digest != y.amalgam_digest:
        raise InputError("cannot multiply elements of different amalgams")
    am = x._amalgam
    return am.from_letters(am.letters_of(y), start=x)


def invert(x: NormalForm) -> NormalForm:
    am = x._amalgam
    letters = [(s, am.inverse_index(s, f)) for s, f in reversed(am.letters_of(x))]
    return am.from_letters(letters)


def equal(x: NormalForm, y: NormalForm) -> bool:
    if x.amalgam_digest != y.amalgam_digest:
        raise InputError("cannot compare elements of different amalgams")
    return x.head == y.head and x.syllables == y.syllables


def act_on_vertex(g: NormalForm, v: VertexId, amalgam: ValidatedAmalgam) -> VertexId:
    """Image ``v^g`` under the right action on cosets of ``A``."""
    _same(g, amalgam)
    amalgam.check_address(v)
    return amalgam.act_letters(amalgam.letters_of(g), v)
