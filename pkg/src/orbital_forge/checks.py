"""Property checks run by ``orbital-forge verify``.

Each check returns a :class:`CheckResult`; none of them raise on a failed
property, only on genuinely broken input. Randomised checks draw from
``random.Random(seed)``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .amalgam import (
    SIDE_A,
    SIDE_P,
    GroupWord,
    ValidatedAmalgam,
    VertexId,
    equal,
    invert,
    multiply,
    normal_form,
)
from .canonical import (
    amalgam_decomposition_report,
    check_equivalence,
    enumerate_canonical,
    refine_to_canonical,
    verify_canonical,
    verify_segment_fundamental_domain,
)
from .decomposition import (
    block_cut_tree,
    classify_ends,
    classify_tree_automorphism,
    cut_vertices,
    quasi_isometry_check,
)
from .errors import OrbitalForgeError
from .graphengine import LobeGraph, OrbitalHandle, suborbits

__all__ = [
    "CheckResult",
    "run_all",
    "random_word",
    "word_agreement",
    "group_axioms",
    "brute_force_suborbits",
    "cut_sets_agree",
]


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: dict = field(default_factory=dict)


def _to_word(amalgam: ValidatedAmalgam, letters) -> GroupWord:
    return GroupWord(tuple(("AP"[side], amalgam._elems[side][f]) for side, f in letters))


def _random_letters(amalgam: ValidatedAmalgam, rng: random.Random, length: int) -> list:
    out = []
    for _ in range(length):
        side = rng.randrange(2)
        out.append((side, rng.randrange(len(amalgam._elems[side]))))
    return out


def random_word(amalgam: ValidatedAmalgam, rng: random.Random, length: int) -> GroupWord:
    return _to_word(amalgam, _random_letters(amalgam, rng, length))


def _equal_pair(amalgam, rng, length):
    """Two different-looking words for the same element."""
    w = _random_letters(amalgam, rng, length)
    pad = _random_letters(amalgam, rng, rng.randint(1, 3))
    pad_inv = [(s, amalgam.inverse_index(s, f)) for s, f in reversed(pad)]
    cut = rng.randint(0, len(w))
    h = amalgam.H_P[rng.randrange(len(amalgam.H_P))]
    # an element of H entered through A and cancelled through P
    h_via_a = [(SIDE_A, amalgam.phi[h]), (SIDE_P, amalgam.inverse_index(SIDE_P, h))]
    other = w[:cut] + pad + h_via_a + pad_inv + w[cut:]
    return _to_word(amalgam, w), _to_word(amalgam, other)


def word_agreement(amalgam: ValidatedAmalgam, pairs: int, seed: int, radius: int = 6,
                   equal_fraction: float = 0.2) -> CheckResult:
    """Normal-form equality against equality of the action on a ball."""
    rng = random.Random(seed)
    ball = LobeGraph(amalgam).ball(radius).vertices
    mismatches, n_equal = [], 0
    for k in range(pairs):
        if rng.random() < equal_fraction:
            w1, w2 = _equal_pair(amalgam, rng, rng.randint(1, 8))
        else:
            w1, w2 = random_word(amalgam, rng, rng.randint(0, 8)), random_word(amalgam, rng, rng.randint(0, 8))
        x, y = normal_form(w1, amalgam), normal_form(w2, amalgam)
        same = equal(x, y)
        n_equal += same
        z = amalgam.letters_of(multiply(x, invert(y)))
        moves = next((v for v in ball if amalgam.act_letters(z, v) != v), None)
        if same == (moves is not None):
            mismatches.append(k)
    return CheckResult("word_problem", not mismatches,
                       {"pairs": pairs, "equal_pairs": n_equal, "mismatches": mismatches[:10]})


def group_axioms(amalgam: ValidatedAmalgam, triples: int, seed: int) -> CheckResult:
    rng = random.Random(seed)
    bad = []
    for k in range(triples):
        x, y, z = (normal_form(random_word(amalgam, rng, rng.randint(0, 6)), amalgam) for _ in range(3))
        if not equal(multiply(multiply(x, y), z), multiply(x, multiply(y, z))):
            bad.append(("assoc", k))
        if not multiply(x, invert(x)).is_identity() or not multiply(invert(x), x).is_identity():
            bad.append(("inverse", k))
    return CheckResult("group_axioms", not bad, {"triples": triples, "failures": bad[:10]})


def brute_force_suborbits(amalgam: ValidatedAmalgam, rmax: int) -> list[list[int]]:
    """Orbits of all of ``A`` (every element, not just generators) on each sphere."""
    ball = LobeGraph(amalgam).ball(rmax)
    out = []
    for r in range(rmax + 1):
        left = set(ball.sphere(r))
        sizes = []
        while left:
            v = min(left)
            orb = {amalgam.act_letters([(SIDE_A, i)], v) for i in range(len(amalgam.A_elems))}
            left -= orb
            sizes.append(len(orb))
        out.append(sizes)
    return out


def cut_sets_agree(d1, d2, r: int) -> bool:
    """Certified cut vertices coincide on the vertices interior to both balls."""
    b1, b2 = d1.graph.ball(r), d2.graph.ball(r)
    common = {v for v in b1.vertices if b1.depth[v] < r and b2.depth.get(v, r) < r}
    return cut_vertices(b1) & common == cut_vertices(b2) & common and bool(common)


def _non_canonical_seeds(amalgam: ValidatedAmalgam, limit: int, rmax: int = 3) -> list[VertexId]:
    seeds = []
    for level in suborbits(LobeGraph(amalgam), rmax).orbits[2:]:
        for orbit in level:
            if OrbitalHandle(amalgam, orbit[0]).span > 2:
                seeds.append(orbit[0])
    return seeds[:limit]


def _check_ends(amalgam, ctx):
    ends = classify_ends(amalgam, 3)
    cert = ends.certificate
    growing = ends.classification == "Uncountable" and all(a < b for a, b in zip(cert, cert[1:]))
    return [CheckResult("ends", growing, {"classification": ends.classification,
                                          "certificate": list(cert)})]


def _descs(amalgam, ctx):
    if "descs" not in ctx:
        ctx["descs"] = enumerate_canonical(amalgam)
    return ctx["descs"]


def _check_structure(amalgam, ctx):
    descs = _descs(amalgam, ctx)
    structure = [verify_canonical(d, 3) for d in descs]
    return [CheckResult("canonical_structure", all(s["ok"] for s in structure),
                        {"descriptors": len(descs), "checks": structure})]


def _check_equivalence(amalgam, ctx):
    descs = _descs(amalgam, ctx)
    pairs_ok = all(check_equivalence(a, b, 3) for a in descs for b in descs)
    cuts_ok = all(cut_sets_agree(a, b, 3) for a in descs for b in descs)
    return [CheckResult("equivalence", pairs_ok and cuts_ok,
                        {"descriptors": len(descs), "pairwise": pairs_ok, "cut_vertices": cuts_ok})]


def _check_refinement(amalgam, ctx):
    descs = _descs(amalgam, ctx)
    refined = []
    for beta in _non_canonical_seeds(amalgam, 3):
        try:
            desc, trace = refine_to_canonical(OrbitalHandle(amalgam, beta))
            refined.append({"seed": str(beta), "n": trace.n,
                            "equivalent": any(check_equivalence(desc, e) for e in descs)})
        except OrbitalForgeError as exc:
            refined.append({"seed": str(beta), "error": type(exc).__name__, "message": str(exc)})
    ok = len(refined) >= 3 and all(r.get("equivalent") and r["n"] <= 3 for r in refined)
    return [CheckResult("refinement", ok, {"seeds": refined})]


def _check_qi(amalgam, ctx):
    descs = _descs(amalgam, ctx)
    if len(descs) < 2:
        return [CheckResult("quasi_isometry", True, {"skipped": "single canonical digraph"})]
    h1 = OrbitalHandle(amalgam, descs[0].seed[1])
    h2 = OrbitalHandle(amalgam, descs[1].seed[1])
    qi = quasi_isometry_check(h1, h2, 4)
    return [CheckResult("quasi_isometry", qi.valid and qi.a == 2,
                        {"a": qi.a, "pairs": qi.verified_pairs, "violations": len(qi.violations)})]


def _check_decomposition(amalgam, ctx):
    dec = amalgam_decomposition_report(amalgam)
    return [CheckResult("amalgam_decomposition: maximality", dec["maximal"],
                        {"witness": dec["intermediate_witness"]}),
            CheckResult("amalgam_decomposition: other", dec["nontrivial"] and dec["fixes_no_other_point"],
                        {"H_order": dec["H_order"], "fixed_points": dec["fixed_points"]})]


def _check_domain(amalgam, ctx):
    fd = verify_segment_fundamental_domain(amalgam, 3)
    return [CheckResult("fundamental_domain",
                        (fd.vertex_orbits, fd.arc_orbits, len(fd.inversions)) == (2, 1, 0), fd.to_dict())]


def _check_subdegrees(amalgam, ctx):
    fast = suborbits(LobeGraph(amalgam), 3).subdegrees
    slow = brute_force_suborbits(amalgam, 3)
    same = len(fast) == len(slow) and all(sorted(a) == sorted(b) for a, b in zip(fast, slow))
    return [CheckResult("subdegrees", same, {"subdegrees": fast})]


def _check_bct(amalgam, ctx):
    bct = block_cut_tree(LobeGraph(amalgam).ball(2))
    return [CheckResult("block_cut_tree", bct.is_forest() and bct.is_bipartite(),
                        {"cut_vertices": len(bct.cut_vertices), "lobes": len(bct.lobes)})]


def run_all(amalgam: ValidatedAmalgam, seed: int = 0, word_pairs: int = 1000) -> list[CheckResult]:
    """Run every check. A check that raises is reported as failed under its own name."""
    steps = [
        ("ends", _check_ends),
        ("canonical_structure", _check_structure),
        ("equivalence", _check_equivalence),
        ("refinement", _check_refinement),
        ("quasi_isometry", _check_qi),
        ("amalgam_decomposition", _check_decomposition),
        ("fundamental_domain", _check_domain),
        ("word_problem", lambda am, ctx: [word_agreement(am, word_pairs, seed)]),
        ("group_axioms", lambda am, ctx: [group_axioms(am, 100, seed)]),
        ("subdegrees", _check_subdegrees),
        ("tits", lambda am, ctx: [_tits(am)]),
        ("block_cut_tree", _check_bct),
    ]
    ctx: dict = {}
    results = []
    for name, step in steps:
        try:
            results.extend(step(amalgam, ctx))
        except OrbitalForgeError as exc:
            results.append(CheckResult(name, False, {"error": type(exc).__name__, "message": str(exc)}))
    return results


def _tits(amalgam: ValidatedAmalgam) -> CheckResult:
    detail, ok = {}, True
    ident = amalgam.identity
    for k, a in enumerate([ident] + [amalgam.element("A", g) for g in amalgam.A_elems]):
        cls = classify_tree_automorphism(a, 4)
        ok &= cls.kind == "Elliptic"
    h_set = set(amalgam.phi.values())
    a = next(i for i in range(len(amalgam.A_elems)) if i not in h_set)
    p = next(i for i in range(len(amalgam.P_elems)) if i not in set(amalgam.H_P))
    g = amalgam.from_letters([(SIDE_A, a), (SIDE_P, p)])
    cls = classify_tree_automorphism(g, 4)
    detail["a*p"] = {"kind": cls.kind, "translation_length": cls.translation_length}
    ok &= cls.kind == "Hyperbolic" and cls.translation_length == 2
    return CheckResult("tits", bool(ok), detail)
