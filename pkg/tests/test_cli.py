import json

import pytest
from conftest import ex1_spec, ex2_spec

from orbital_forge import checks, cli, fixture_path
from orbital_forge.errors import SpecParseError, ValidationError
from orbital_forge.specfile import load_spec, parse_spec

EX1 = str(fixture_path("ex1"))
EX2 = str(fixture_path("ex2"))

C4_SPEC = """\
[group P]
degree = 4
gens = (0 1 2 3)

[group A]
degree = 2
gens = (0 1)

[amalgam]
P = P
A = A
delta = 0
embedding =
lambda_arc = 0 1
"""


@pytest.fixture(autouse=True)
def _isolated_cap(monkeypatch):
    # the loader may copy the spec-file cap into the environment; monkeypatch undoes it
    monkeypatch.setenv("ORBITAL_FORGE_MAX_VERTICES", "")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def payload(out):
    return json.loads(out)["result"]


# spec files

def test_fixtures_parse_to_the_reference_specs():
    assert load_spec(EX1).spec == ex1_spec()
    assert load_spec(EX2).spec == ex2_spec()
    assert load_spec(EX1).limits == {"max_radius": 6}


def test_digest_tracks_the_text():
    text = fixture_path("ex1").read_text()
    assert parse_spec(text).digest == parse_spec(text).digest != parse_spec(text + "\n").digest


@pytest.mark.parametrize("text, line, fragment", [
    ("[group P]\ndegree = 3\ngens = (0 1\n", 3, "malformed"),
    ("[group P]\ndegree = 3\ncolour = red\n", 3, "unknown key"),
    ("[bogus]\n", 1, "unknown section"),
    ("[group P]\ndegree = 3\ndegree = 4\n", 3, "duplicate"),
    ("degree = 3\n", 1, "outside"),
])
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(SpecParseError) as info:
        parse_spec(text)
    assert f"line {line}" in str(info.value) and fragment in str(info.value)


def test_h_key_must_match_embedding():
    text = fixture_path("ex1").read_text().replace("H = (1 2)", "H = (0 1)")
    with pytest.raises(ValidationError) as info:
        parse_spec(text)
    assert info.value.code == "H_MISMATCH"


# validate

def test_validate_ex1(capsys):
    code, out, _ = run(capsys, "validate", EX1)
    assert code == 0 and "m=2" in out and "|Delta|=3" in out


def test_validate_c4_is_imprimitive(capsys, tmp_path):
    path = tmp_path / "c4.spec"
    path.write_text(C4_SPEC)
    code, _, err = run(capsys, "validate", str(path))
    assert code == 2 and "lobe group imprimitive" in err and "witness: [0, 2]" in err


def test_validate_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.spec"
    path.write_text("[group P]\ndegree = 3\ngens = (0 1\n")
    code, _, err = run(capsys, "validate", str(path))
    assert code == 1 and "line 3" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.spec"))
    assert code == 1 and "cannot read" in err


# expand

def test_expand_json_radius_one(capsys):
    code, out, _ = run(capsys, "expand", EX1, "--radius", "1")
    doc = json.loads(out)
    assert code == 0 and len(doc["vertices"]) == 5 and len(doc["arcs"]) == 12


def test_expand_radius_zero(capsys):
    code, out, _ = run(capsys, "expand", EX1, "--radius", "0")
    doc = json.loads(out)
    assert code == 0 and len(doc["vertices"]) == 1 and doc["arcs"] == []


def test_expand_dot_to_file(capsys, tmp_path):
    target = tmp_path / "ex2.dot"
    code, out, _ = run(capsys, "expand", EX2, "--radius", "2", "--format", "dot", "--output", str(target))
    assert code == 0 and "17 vertices" in out
    dot = target.read_text()
    assert 'label="#0"' in dot and dot.count("->") == int(out.split(", ")[1].split()[0])


def test_expand_is_bit_stable(capsys):
    _, first, _ = run(capsys, "expand", EX2, "--radius", "2")
    _, second, _ = run(capsys, "expand", EX2, "--radius", "2")
    assert first == second


def test_capacity_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("ORBITAL_FORGE_MAX_VERTICES", "10")
    code, _, err = run(capsys, "expand", EX1, "--radius", "3")
    assert code == 3 and "cap 10" in err


def test_capacity_from_max_radius(capsys):
    code, _, err = run(capsys, "expand", EX1, "--radius", "7")
    assert code == 3 and "max_radius" in err


def test_spec_file_vertex_cap(capsys, tmp_path):
    path = tmp_path / "capped.spec"
    path.write_text(fixture_path("ex1").read_text() + "max_vertices = 6\n")
    assert run(capsys, "expand", str(path), "--radius", "1")[0] == 0
    assert run(capsys, "expand", str(path), "--radius", "2")[0] == 3


def test_bad_environment_cap(capsys, monkeypatch):
    monkeypatch.setenv("ORBITAL_FORGE_MAX_VERTICES", "abc")
    assert run(capsys, "expand", EX1, "--radius", "1")[0] == 1


# analyze

def test_analyze_ex1(capsys):
    code, out, _ = run(capsys, "analyze", EX1, "--radius", "2")
    res = payload(out)
    assert code == 0
    assert res["ends"]["classification"] == "Uncountable" and res["ends"]["certificate"] == [2, 4, 8]
    assert res["subdegrees"] == [[1], [4], [4, 4]]
    assert [(s["size"], s["multiplicity"]) for s in res["subdegree_sizes"]] == [(1, 1), (4, 1), (4, 2)]
    assert res["lobes"] == {"boundary": 0, "certified": 6}
    assert res["block_cut_tree"]["forest"] and res["block_cut_tree"]["bipartite"]


def test_analyze_ex2_radius_one(capsys):
    res = payload(run(capsys, "analyze", EX2, "--radius", "1")[1])
    assert res["subdegrees"] == [[1], [4]]


def test_analyze_radius_zero(capsys):
    code, out, _ = run(capsys, "analyze", EX1, "--radius", "0")
    res = payload(out)
    assert code == 0 and res["subdegrees"] == [[1]]
    assert res["ends"]["status"] == "unresolved" and not res["ends"]["inferred_from_theorem"]


def test_envelope_fields_and_determinism(capsys):
    _, a, _ = run(capsys, "analyze", EX2, "--radius", "2")
    _, b, _ = run(capsys, "analyze", EX2, "--radius", "2")
    da, db = json.loads(a), json.loads(b)
    assert set(da) == {"command", "input_digest", "version", "result", "timing"}
    assert da["input_digest"] == load_spec(EX2).digest
    assert json.dumps(da["result"], sort_keys=True) == json.dumps(db["result"], sort_keys=True)


# canonical

def test_canonical_enumerate(capsys):
    code, out, _ = run(capsys, "canonical", EX2, "--enumerate")
    descs = payload(out)["descriptors"]
    assert code == 0 and [d["lambda_arc"] for d in descs] == [[0, 1], [0, 2]]


def test_canonical_equiv(capsys):
    code, out, _ = run(capsys, "canonical", EX2, "--equiv", "0", "1")
    assert code == 0 and payload(out)["equivalent"] is True
    assert run(capsys, "canonical", EX2, "--equiv", "0", "5")[0] == 1


def test_canonical_refine_neighbour_seed(capsys):
    code, out, _ = run(capsys, "canonical", EX1, "--refine", "l0.v1")
    res = payload(out)
    assert code == 0 and res["trace"]["n"] == 1 and res["equivalent_to"] == [0]


def test_canonical_refine_disconnected_seeds(capsys):
    # inside the root's block: provably disconnected, so a precondition failure
    code, _, err = run(capsys, "canonical", EX1, "--refine", "l0.v1/l1.v1")
    assert code == 2 and "disconnected" in err
    # outside it: the search budget runs out without a path back
    code, _, err = run(capsys, "canonical", EX1, "--refine", "l0.v1/l1.v2")
    assert code == 4 and "unresolved" in err


# blocks

def test_blocks_command(capsys):
    code, out, _ = run(capsys, "blocks", EX2, "--radius", "2")
    res = payload(out)
    assert code == 0 and res["found"] and res["certified"] and res["blocks"] == 5
    assert res["pair"] == ["", "l0.v1/l1.v1"]


# verify

def test_verify_reports_refinement_failure(capsys, tmp_path):
    report = tmp_path / "checks.json"
    code, out, err = run(capsys, "verify", EX1, "--word-pairs", "40", "--json", str(report))
    assert code == 5 and "failed: refinement" in err
    rows = {r["name"]: r["ok"] for r in json.loads(report.read_text())}
    assert [name for name, ok in rows.items() if not ok] == ["refinement"]
    assert "word_problem" in out and "PASS" in out


def test_verify_flags_non_maximal_h(capsys, monkeypatch):
    real = checks.amalgam_decomposition_report

    def corrupted(amalgam):
        rep = dict(real(amalgam))
        rep.update(maximal=False, intermediate_witness="(0 1 2)", ok=False)
        return rep

    monkeypatch.setattr(checks, "amalgam_decomposition_report", corrupted)
    monkeypatch.setattr(checks, "_check_refinement", lambda am, ctx: [])
    code, out, err = run(capsys, "verify", EX1, "--word-pairs", "20")
    assert code == 5 and "amalgam_decomposition: maximality" in err
    assert "amalgam_decomposition: other" not in err


def test_verify_passes_once_refinement_is_set_aside(capsys, monkeypatch):
    monkeypatch.setattr(checks, "_check_refinement", lambda am, ctx: [])
    assert run(capsys, "verify", EX1, "--word-pairs", "20", "--seed", "7")[0] == 0
