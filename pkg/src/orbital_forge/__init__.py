"""Connectivity-one orbital digraphs of amalgamated free products of finite permutation groups."""
from importlib.resources import files

from .amalgam import AmalgamSpec, ValidatedAmalgam, VertexId, validate
from .errors import (
    CapacityError,
    ConsistencyError,
    InputError,
    OrbitalForgeError,
    PreconditionError,
    SpecParseError,
    UnresolvedError,
    ValidationError,
)
from .graphengine import LobeGraph, OrbitalHandle, expand_ball
from .specfile import load_spec, parse_spec

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a shipped spec file, ``"ex1"`` or ``"ex2"``."""
    return files(__name__).joinpath("fixtures", f"{name}.spec")


__all__ = [
    "AmalgamSpec",
    "ValidatedAmalgam",
    "VertexId",
    "validate",
    "LobeGraph",
    "OrbitalHandle",
    "expand_ball",
    "load_spec",
    "parse_spec",
    "fixture_path",
    "OrbitalForgeError",
    "InputError",
    "SpecParseError",
    "PreconditionError",
    "ValidationError",
    "CapacityError",
    "UnresolvedError",
    "ConsistencyError",
]
