"""Command-line interface: ``orbital-forge <command> SPEC [options]``.

Exit codes: 0 success, 1 parse/input error, 2 validation error, 3 capacity
exceeded, 4 unresolved within caps, 5 a verification check failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .amalgam import ValidatedAmalgam, VertexId, validate
from .canonical import (
    block_search,
    check_equivalence,
    enumerate_canonical,
    refine_to_canonical,
)
from .checks import run_all
from .decomposition import block_cut_tree, classify_ends, lobes
from .errors import CapacityError, ConsistencyError, OrbitalForgeError, UnresolvedError, ValidationError
from .graphengine import LobeGraph, OrbitalHandle, ball_to_dot, ball_to_json, suborbits
from .specfile import SpecFile, load_spec

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_UNRESOLVED, EXIT_VERIFY = range(6)


def _envelope(command: str, spec: SpecFile, result, started: float) -> str:
    doc = {
        "command": command,
        "input_digest": spec.digest,
        "version": __version__,
        "result": result,
        "timing": {"seconds": round(time.perf_counter() - started, 6)},
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def _load(path) -> tuple[SpecFile, ValidatedAmalgam]:
    spec = load_spec(path)
    cap = spec.limits.get("max_vertices")
    if cap is not None and not os.environ.get("ORBITAL_FORGE_MAX_VERTICES"):
        os.environ["ORBITAL_FORGE_MAX_VERTICES"] = str(cap)
    return spec, validate(spec.spec)


def _radius(spec: SpecFile, r: int) -> int:
    if r < 0:
        raise OrbitalForgeError("radius must be non-negative")
    top = spec.limits.get("max_radius")
    if top is not None and r > top:
        raise CapacityError(f"radius {r} exceeds max_radius {top} set in the spec file")
    return r


def cmd_validate(args) -> int:
    spec, am = _load(args.spec)
    print(f"valid: m={am.m} |Delta|={am.lambda_digraph.n} |P|={len(am.P_elems)} "
          f"|A|={len(am.A_elems)} |H|={len(am.H_P)}")
    print(f"digest: {am.digest}")
    return EXIT_OK


def cmd_expand(args) -> int:
    spec, am = _load(args.spec)
    ball = LobeGraph(am).ball(_radius(spec, args.radius))
    text = ball_to_json(ball) if args.format == "json" else ball_to_dot(ball)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {len(ball.vertices)} vertices, {len(ball.arcs)} arcs to {args.output}")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


def analyze(am: ValidatedAmalgam, R: int) -> dict:
    lg = LobeGraph(am)
    ends = classify_ends(lg, R)
    ball = lg.ball(R)
    ls = lobes(ball)
    bct = block_cut_tree(ball)
    sub = suborbits(lg, R)
    sizes = []
    for level in sub.subdegrees:
        for size in sorted(set(level)):
            sizes.append({"size": size, "multiplicity": level.count(size)})
    return {
        "ends": json.loads(ends.to_json()),
        "lobes": {"certified": len(ls.certified_lobes), "boundary": len(ls.boundary_blocks)},
        "block_cut_tree": {
            "cut_vertices": len(bct.cut_vertices),
            "lobes": len(bct.lobes),
            "edges": len(bct.edges),
            "forest": bct.is_forest(),
            "bipartite": bct.is_bipartite(),
        },
        "subdegrees": sub.subdegrees,
        "subdegree_sizes": sizes,
        "sphere_sizes": ball.sphere_sizes(),
    }


def cmd_analyze(args) -> int:
    started = time.perf_counter()
    spec, am = _load(args.spec)
    result = analyze(am, _radius(spec, args.radius))
    print(_envelope("analyze", spec, result, started))
    return EXIT_OK


def cmd_canonical(args) -> int:
    started = time.perf_counter()
    spec, am = _load(args.spec)
    descs = enumerate_canonical(am)
    if args.refine is not None:
        try:
            desc, trace = refine_to_canonical(OrbitalHandle(am, VertexId.parse(args.refine)))
        except UnresolvedError as exc:
            print(f"unresolved: {exc}", file=sys.stderr)
            if exc.partial is not None:
                print(exc.partial.to_json())
            return EXIT_UNRESOLVED
        match = [k for k, e in enumerate(descs) if check_equivalence(desc, e)]
        result = {"descriptor": desc.to_dict(), "trace": json.loads(trace.to_json()),
                  "equivalent_to": match}
    elif args.equiv is not None:
        i, j = args.equiv
        if not (0 <= i < len(descs) and 0 <= j < len(descs)):
            raise OrbitalForgeError(f"descriptor indices must lie in 0..{len(descs) - 1}")
        result = {"i": i, "j": j, "equivalent": check_equivalence(descs[i], descs[j], args.radius)}
    else:
        result = {"descriptors": [dict(d.to_dict(), index=k, lambda_dot=d.lambda_dot())
                                  for k, d in enumerate(descs)]}
    print(_envelope("canonical", spec, result, started))
    return EXIT_OK


def cmd_blocks(args) -> int:
    started = time.perf_counter()
    spec, am = _load(args.spec)
    print(_envelope("blocks", spec, block_search(am, _radius(spec, args.radius)), started))
    return EXIT_OK


def cmd_verify(args) -> int:
    _, am = _load(args.spec)
    results = run_all(am, seed=args.seed, word_pairs=args.word_pairs)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL'}")
    failed = [r for r in results if not r.ok]
    if args.json:
        Path(args.json).write_text(json.dumps(
            [{"name": r.name, "ok": r.ok, "detail": r.detail} for r in results],
            sort_keys=True, indent=2, default=str))
    if failed:
        print("failed: " + ", ".join(r.name for r in failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbital-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an amalgam spec file")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("expand", help="export a ball of the digraph")
    p.add_argument("spec")
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--output")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("analyze", help="ends, lobes, block-cut tree and subdegrees")
    p.add_argument("spec")
    p.add_argument("--radius", type=int, default=2)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("canonical", help="enumerate, refine or compare canonical digraphs")
    p.add_argument("spec")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--enumerate", action="store_true", help="list descriptors (default)")
    mode.add_argument("--refine", metavar="ADDRESS", help="refine the orbital digraph seeded at ADDRESS")
    mode.add_argument("--equiv", nargs=2, type=int, metavar=("I", "J"))
    p.add_argument("--radius", type=int, default=3, help="ball radius for --equiv")
    p.set_defaults(func=cmd_canonical)

    p = sub.add_parser("blocks", help="search for blocks of imprimitivity of the amalgam")
    p.add_argument("spec")
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("verify", help="run every property check")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--word-pairs", type=int, default=1000)
    p.add_argument("--json", metavar="PATH", help="also write per-check details as JSON")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error [{exc.code}]: {exc}", file=sys.stderr)
        if exc.witness is not None:
            print(f"witness: {exc.witness}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConsistencyError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OrbitalForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
