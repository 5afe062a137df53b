import json
from pathlib import Path

import pytest

from stickychase.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_classify_json_fields(capsys):
    code, out, _ = run(capsys, "classify", FIXTURES / "ex13.dlp", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["weakly_sticky"] is True
    assert data["jws"] is True
    assert data["sticky"] is False


def test_classify_empty_program(tmp_path, capsys):
    path = tmp_path / "empty.dlp"
    path.write_text("")
    code, out, _ = run(capsys, "classify", path, "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["sticky"] and data["weakly_acyclic"]
    assert data["finite_rank_positions"] == []


def test_classify_malformed_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.dlp"
    path.write_text("r(a b).")
    code, _, err = run(capsys, "classify", path)
    assert code == 2
    assert err.strip()


def test_missing_file_exits_4(capsys):
    code, _, err = run(capsys, "classify", "/nonexistent/path.dlp")
    assert code == 4


def test_query_boolean_yes(capsys):
    code, out, _ = run(
        capsys,
        "query",
        FIXTURES / "ex9.dlp",
        "--query",
        "?() <- p(c,Y).",
        "--selection",
        "rank",
    )
    assert code == 0
    assert out.strip() == "yes"


def test_query_boolean_no_exits_1(tmp_path, capsys):
    path = tmp_path / "p.dlp"
    path.write_text("q(a).")
    code, out, _ = run(capsys, "query", path, "--query", "?() <- q(b).")
    assert code == 1
    assert out.strip() == "no"


def test_query_precondition_exit_3(capsys):
    code, _, err = run(
        capsys,
        "query",
        FIXTURES / "ex8.dlp",
        "--query",
        "?() <- p(a,Y).",
        "--selection",
        "rank",
    )
    assert code == 3
    code, out, _ = run(
        capsys,
        "query",
        FIXTURES / "ex8.dlp",
        "--query",
        "?() <- p(a,Y).",
        "--selection",
        "rank",
        "--force",
    )
    assert code == 1  # forced run proceeds; the answer is no


def test_query_rewrite_first_matches_chase(capsys):
    code, out, _ = run(
        capsys,
        "query",
        FIXTURES / "ex10.dlp",
        "--query",
        "?() <- p(a,Y).",
        "--rewrite-first",
    )
    assert code == 1
    assert out.strip() == "no"


def test_rewrite_emits_expected_pieces(capsys):
    code, out, _ = run(
        capsys, "rewrite", FIXTURES / "ex10.dlp", "--query", "?() <- p(a,Y)."
    )
    assert code == 0
    assert "mg_p__bf(a)." in out
    assert "mg_p__bf(X) -> mg_r__bf(X)." in out
    assert "mg_r__bf(X), r__bf(X,Y) -> mg_r__bf(Y)." in out
    assert "mg_r__bf(V1), r(V1,V2) -> r__bf(V1,V2)." in out
    assert "mg_r__fb(V2), r(V1,V2) -> r__fb(V1,V2)." in out
    assert "% query: ?() <- p__bf(a,Y)." in out


def test_rewrite_merge_magic_example_13(capsys):
    code, out, _ = run(
        capsys,
        "rewrite",
        FIXTURES / "ex13.dlp",
        "--query",
        "?() <- r(Y,a).",
        "--merge-magic",
    )
    assert code == 0
    assert "mg_r(a)." in out
    assert "mg_r(X), r__bf(X,Y) -> mg_r(Y)." in out
    assert "mg_r(V2), r__fb(V1,V2) -> mg_r(V1)." in out


def test_chase_no_rules(tmp_path, capsys):
    path = tmp_path / "facts.dlp"
    path.write_text("p(a). p(b).")
    code, out, _ = run(capsys, "chase", path)
    assert code == 0
    assert "% status: terminated" in out
    assert "p(a)." in out and "p(b)." in out


def test_chase_budget_cutoff(capsys):
    code, out, _ = run(
        capsys, "chase", FIXTURES / "ex1.dlp", "--max-atoms", "6"
    )
    assert code == 0
    assert "% status: budget_exhausted" in out
    atom_lines = [l for l in out.splitlines() if l and not l.startswith("%")]
    assert len(atom_lines) == 7  # budget plus the atom that broke it


def test_chase_trace_export(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    code, _, _ = run(
        capsys,
        "chase",
        FIXTURES / "ex1.dlp",
        "--max-atoms",
        "6",
        "--trace",
        trace,
    )
    assert code == 0
    lines = trace.read_text().strip().splitlines()
    assert len(lines) == 6
    assert all("level" in json.loads(l) for l in lines)


def test_check_reports_violation(capsys):
    code, out, _ = run(
        capsys,
        "check",
        FIXTURES / "ex4_p1.dlp",
        "--selection",
        "bottom",
        "--steps",
        "10",
    )
    assert code == 0
    assert "violation" in out
    assert "value b" in out


def test_check_no_violation(capsys):
    code, out, _ = run(
        capsys,
        "check",
        FIXTURES / "ex4_p2.dlp",
        "--selection",
        "bottom",
        "--steps",
        "10",
    )
    assert code == 0
    assert out.startswith("no_violation_up_to_k")


def test_json_output_is_stable(capsys):
    outputs = []
    for _ in range(2):
        code, out, _ = run(
            capsys, "classify", FIXTURES / "ex9.dlp", "--format", "json"
        )
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]

    for _ in range(2):
        code, out, _ = run(
            capsys,
            "chase",
            FIXTURES / "ex1.dlp",
            "--max-atoms",
            "6",
            "--format",
            "json",
        )
        outputs.append(out)
    assert outputs[2] == outputs[3]


def test_facts_loading_option(tmp_path, capsys):
    program = tmp_path / "p.dlp"
    program.write_text("r(a,b). r(X,Y) -> t(Y,X).")
    facts = tmp_path / "more.csv"
    facts.write_text("b,c\nc,d\n")
    code, out, _ = run(
        capsys,
        "query",
        program,
        "--facts",
        f"r={facts}",
        "--query",
        "?(X,Y) <- t(X,Y).",
    )
    assert code == 0
    rows = {tuple(l.split(",")) for l in out.strip().splitlines()}
    assert rows == {("b", "a"), ("c", "b"), ("d", "c")}
