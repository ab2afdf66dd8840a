from __future__ import annotations

import json
import subprocess
import sys

import pytest

from probcer.cli import main

from conftest import DATA

RULES = str(DATA / "assist.rules")
TABLE1 = str(DATA / "table1.jsonl")


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, [json.loads(l) for l in out.splitlines() if l.strip()], err


def test_recognize_table_one(capsys):
    code, rows, err = _run(capsys, "recognize", "--rules", RULES, "--input", TABLE1)
    assert code == 0 and err == ""
    assert [r["prob"] for r in rows] == [0.48195, 0.5508, 0.61965]
    assert rows[0] == {"type": "assist", "ts": 6, "args": {"X": "p2", "Y": "p3"}, "prob": 0.48195,
                       "ids": ["e5", "e7", "e8", "e10"]}


def test_threshold(capsys):
    code, rows, _ = _run(capsys, "recognize", "--rules", RULES, "--input", TABLE1, "--threshold", "0.99")
    assert code == 0 and rows == []


def test_empty_input(capsys, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code, rows, _ = _run(capsys, "recognize", "--rules", RULES, "--input", str(empty))
    assert (code, rows) == (0, [])


def test_markov_flags(capsys):
    code, rows, _ = _run(capsys, "recognize", "--rules", RULES, "--input", TABLE1, "--model", "markov",
                         "--cpt", str(DATA / "cpt.json"))
    assert code == 0 and rows[0]["prob"] == 0.508725


def test_output_file_and_summary(capsys, tmp_path):
    out = tmp_path / "o.jsonl"
    code, rows, err = _run(capsys, "recognize", "--rules", RULES, "--input", TABLE1, "--output", str(out),
                           "--report", "marginal", "--summary")
    assert code == 0 and rows == []
    assert json.loads(err)["matches"] == 3
    assert len(out.read_text().splitlines()) == 2


def test_oracle(capsys):
    code, rows, err = _run(capsys, "oracle", "--rules", str(DATA / "dunk.rules"), "--input",
                           str(DATA / "dunk.jsonl"), "--summary")
    assert code == 0
    assert rows == [{"type": "dunk", "ts": 19873294680, "args": {"P": "antetokounmpo"}, "prob": 0.336, "ids": []}]
    assert json.loads(err)["histories"] == 8


def test_oracle_space_too_large(capsys, tmp_path):
    p = tmp_path / "big.jsonl"
    p.write_text("".join(json.dumps({"type": "a", "ts": i, "prob": 0.5}) + "\n" for i in range(23)))
    r = tmp_path / "r.rules"
    r.write_text("x(T) ::= a(T) .")
    code, _, err = _run(capsys, "oracle", "--rules", str(r), "--input", str(p))
    assert code == 4 and json.loads(err)["error"] == "SPACE_TOO_LARGE"


@pytest.mark.parametrize("argv, error", [
    (["recognize", "--rules", "missing.rules", "--input", TABLE1], "CANNOT_OPEN"),
    (["recognize", "--rules", RULES, "--input", TABLE1, "--report", "marginal", "--model", "markov",
      "--cpt", str(DATA / "cpt.json")], "UNSUPPORTED_MODEL"),
    (["recognize", "--rules", RULES, "--input", TABLE1, "--cpt", str(DATA / "cpt.json")], "BAD_MODEL"),
    (["oracle", "--rules", RULES, "--input", TABLE1, "--decay", "0.5"], "UNSUPPORTED_MODEL"),
])
def test_config_errors(capsys, argv, error):
    assert main(argv) == 2
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 and json.loads(err)["error"] == error


def test_bad_flag_value(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["recognize", "--rules", RULES, "--input", TABLE1, "--threshold", "3"])
    assert ei.value.code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "BAD_ARGUMENTS"


def test_parse_error_exit(capsys, tmp_path):
    r = tmp_path / "bad.rules"
    r.write_text("x(T) ::= a(T) ; ) .")
    code, _, err = _run(capsys, "validate", "--rules", str(r))
    info = json.loads(err)
    assert code == 2 and info["error"] == "SYNTAX_ERROR" and info["line"] == 1


def test_stream_error_exit(capsys, tmp_path):
    p = tmp_path / "ooo.jsonl"
    p.write_text('{"type":"hasBall","ts":5,"args":{"player":"a"}}\n{"type":"hasBall","ts":3,"args":{"player":"b"}}\n')
    code, _, err = _run(capsys, "recognize", "--rules", RULES, "--input", str(p))
    assert code == 3 and json.loads(err)["error"] == "OUT_OF_ORDER_EVENT"


def test_validate_and_dump(capsys):
    code, rows, _ = _run(capsys, "validate", "--rules", RULES)
    assert code == 0 and rows == [{"ok": True, "rules": 1, "levels": 1, "warnings": []}]
    assert main(["validate", "--rules", RULES, "--dump-plan"]) == 0
    assert capsys.readouterr().out == (DATA / "assist.plan").read_text()


def test_score(capsys):
    p = str(DATA / "corpus" / "synthetic_per_match.jsonl")
    code, rows, _ = _run(capsys, "score", p, p)
    assert code == 0 and rows[0]["f_measure"] == 1.0


def test_score_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n")
    code, _, err = _run(capsys, "score", str(bad), str(bad))
    assert code == 2 and json.loads(err)["error"] == "MALFORMED_LINE"


def test_entry_point_subprocess():
    res = subprocess.run([sys.executable, "-m", "probcer.cli", "recognize", "--rules", RULES, "--input", TABLE1],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert len(res.stdout.splitlines()) == 3
