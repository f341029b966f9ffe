import pytest

from orbital_forge.amalgam import AmalgamSpec, ValidatedAmalgam, validate
from orbital_forge.permcore import FiniteGroup, parse_permutation


def make_spec(p_degree, p_gens, a_degree, a_gens, emb, arc=(0, 1), delta=0):
    P = FiniteGroup.from_cycles(p_degree, *p_gens)
    A = FiniteGroup.from_cycles(a_degree, *a_gens)
    pairs = tuple((parse_permutation(h, p_degree), parse_permutation(a, a_degree)) for h, a in emb)
    return AmalgamSpec(P, delta, A, pairs, arc)


def ex1_spec(arc=(0, 1)):
    return make_spec(3, ["(0 1 2)", "(1 2)"], 4, ["(0 1)", "(2 3)"], [("(1 2)", "(0 1)")], arc)


def ex2_spec(arc=(0, 1)):
    return make_spec(5, ["(0 1 2 3 4)", "(1 4)(2 3)"], 4, ["(0 1)", "(2 3)"], [("(1 4)(2 3)", "(0 1)")], arc)


def imprimitive_toy():
    """P = C4 regular on 4 points, H trivial, A = C2: forced past validation."""
    spec = make_spec(4, ["(0 1 2 3)"], 2, ["(0 1)"], [], (0, 1))
    return ValidatedAmalgam(spec, check=False)


@pytest.fixture(scope="session")
def ex1():
    return validate(ex1_spec())


@pytest.fixture(scope="session")
def ex2():
    return validate(ex2_spec())


@pytest.fixture(scope="session", params=["ex1", "ex2"])
def fixture_amalgam(request, ex1, ex2):
    return {"ex1": ex1, "ex2": ex2}[request.param]


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
