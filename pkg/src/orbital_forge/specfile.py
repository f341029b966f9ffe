"""Reader for the line-oriented amalgam spec format.

::

    # comments start with '#'
    [group P]
    degree = 3
    gens = (0 1 2); (1 2)

    [group A]
    degree = 4
    gens = (0 1); (2 3)

    [amalgam]
    P = P
    A = A
    delta = 0
    H = (1 2)
    embedding = (1 2) -> (0 1)
    lambda_arc = 0 1

    [limits]
    max_radius = 6
    max_vertices = 1000000

Permutations use cycle notation ``(0 1 2)(3 4)`` or image lists ``[1,2,0]``;
lists of them are separated by ``;``. ``H`` is optional and, when given, must
generate the same subgroup of ``P`` as the left-hand sides of ``embedding``.
The ``[limits]`` section is optional.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .amalgam import AmalgamSpec
from .errors import InputError, SpecParseError, ValidationError
from .permcore import FiniteGroup, parse_permutation

__all__ = ["SpecFile", "parse_spec", "load_spec"]

_KEYS = {
    "group": {"degree", "gens"},
    "amalgam": {"P", "A", "delta", "H", "embedding", "lambda_arc"},
    "limits": {"max_radius", "max_vertices"},
}
_REQUIRED = {
    "group": {"degree", "gens"},
    "amalgam": {"P", "A", "delta", "embedding", "lambda_arc"},
    "limits": set(),
}


@dataclass
class SpecFile:
    spec: AmalgamSpec
    groups: dict[str, FiniteGroup]
    limits: dict[str, int] = field(default_factory=dict)
    digest: str = ""


def _int(value: str, line: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise SpecParseError(f"{key} must be an integer, got {value!r}", line) from None


def _perms(text: str, degree: int, line: int) -> list:
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        try:
            out.append(parse_permutation(part, degree))
        except InputError as exc:
            raise SpecParseError(str(exc), line) from None
    return out


def parse_spec(text: str) -> SpecFile:
    sections: list[tuple[str, str | None, int, dict]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SpecParseError(f"unterminated section header {line!r}", lineno)
            head = line[1:-1].split()
            kind = head[0] if head else ""
            if kind not in _KEYS:
                raise SpecParseError(f"unknown section {kind!r}", lineno)
            if (kind == "group") != (len(head) == 2) or len(head) > 2:
                raise SpecParseError("expected [group NAME], [amalgam] or [limits]", lineno)
            current = (kind, head[1] if len(head) == 2 else None, lineno, {})
            sections.append(current)
            continue
        if current is None:
            raise SpecParseError("key outside of any section", lineno)
        if "=" not in line:
            raise SpecParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS[current[0]]:
            raise SpecParseError(f"unknown key {key!r} in [{current[0]}]", lineno)
        if key in current[3]:
            raise SpecParseError(f"duplicate key {key!r}", lineno)
        current[3][key] = (value, lineno)

    groups: dict[str, FiniteGroup] = {}
    amalgam = limits = None
    for kind, name, lineno, body in sections:
        missing = _REQUIRED[kind] - body.keys()
        if missing:
            raise SpecParseError(f"[{kind}] is missing {sorted(missing)}", lineno)
        if kind == "group":
            if name in groups:
                raise SpecParseError(f"group {name!r} defined twice", lineno)
            degree = _int(*body["degree"], "degree")
            if degree < 1:
                raise SpecParseError("degree must be positive", body["degree"][1])
            gens = _perms(body["gens"][0], degree, body["gens"][1])
            groups[name] = FiniteGroup(degree, tuple(gens))
        elif kind == "amalgam":
            if amalgam is not None:
                raise SpecParseError("more than one [amalgam] section", lineno)
            amalgam = body
        else:
            if limits is not None:
                raise SpecParseError("more than one [limits] section", lineno)
            limits = {k: _int(v, ln, k) for k, (v, ln) in body.items()}
    if amalgam is None:
        raise SpecParseError("no [amalgam] section")

    def group(key):
        value, ln = amalgam[key]
        if value not in groups:
            raise SpecParseError(f"{key} refers to undefined group {value!r}", ln)
        return groups[value]

    P, A = group("P"), group("A")
    delta = _int(*amalgam["delta"], "delta")
    value, ln = amalgam["lambda_arc"]
    parts = value.replace(",", " ").split()
    if len(parts) != 2:
        raise SpecParseError("lambda_arc needs two points", ln)
    arc = (_int(parts[0], ln, "lambda_arc"), _int(parts[1], ln, "lambda_arc"))
    value, ln = amalgam["embedding"]
    pairs = []
    for item in value.split(";"):
        if not item.strip():
            continue
        if "->" not in item:
            raise SpecParseError(f"embedding entry {item.strip()!r} lacks '->'", ln)
        left, right = item.split("->", 1)
        pairs.append((_perms(left, P.degree, ln)[0], _perms(right, A.degree, ln)[0]))
    if "H" in amalgam:
        h_gens = _perms(amalgam["H"][0], P.degree, amalgam["H"][1])
        if not FiniteGroup(P.degree, tuple(h_gens)).same_elements(
            FiniteGroup(P.degree, tuple(h for h, _ in pairs))
        ):
            raise ValidationError("H_MISMATCH", "H differs from the subgroup named by the embedding")
    spec = AmalgamSpec(P, delta, A, tuple(pairs), arc)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return SpecFile(spec, groups, limits or {}, digest)


def load_spec(path) -> SpecFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_spec(text)
