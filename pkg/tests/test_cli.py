import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from heraklit import model_path
from heraklit.cli import main

MODEL = str(model_path())
ONE = str(model_path("one_client.json"))
TWO = str(model_path("two_clients.json"))


def run_cli(*args):
    return main([str(a) for a in args])


def test_check_ok(capsys):
    assert run_cli("check", MODEL) == 0
    out = capsys.readouterr().out
    assert "system service: 17 places, 11 transitions" in out
    assert out.rstrip().endswith(": ok")


KIND_CLASH = """signature s {
  sort A;
  var x : A;
}
module l {
  place p : A;
  right g = p;
}
module r {
  place p : A;
  transition t { in p : x; }
  left g = t;
}
system bad = l . r;
"""


def test_check_reports_kind_mismatch(tmp_path, capsys):
    src = tmp_path / "bad.hkl"
    src.write_text(KIND_CLASH)
    assert run_cli("check", src) == 1
    err = capsys.readouterr().err
    assert "line 14: system bad: composition error: gate g is a place on the left but a transition on the right" in err


def test_check_reports_syntax_error(tmp_path, capsys):
    src = tmp_path / "bad.hkl"
    src.write_text("signature s {\n  sort A\n}\n")
    assert run_cli("check", src) == 2
    assert "line 3, column 1: expected ';'" in capsys.readouterr().err


def test_simulate_one_client(tmp_path, capsys):
    out = tmp_path / "run.json"
    assert run_cli("simulate", MODEL, "--scenario", ONE, "--seed", 7, "--out", out, "--log", tmp_path / "run.jsonl") == 0
    doc = json.loads(out.read_text())
    assert len(doc["events"]) == 9
    assert [e["transition"] for e in doc["events"]] == list("abjfdhige")
    assert doc["outcome"] == "complete"
    assert doc["provenance"] == {
        "maxSteps": 200, "model": "service_system.hkl", "seed": 7, "structure": "default", "system": "service",
    }
    assert len((tmp_path / "run.jsonl").read_text().splitlines()) == 9
    assert "9 events, outcome complete" in capsys.readouterr().out


def test_verify_mine_export_pipeline(tmp_path, capsys):
    run = tmp_path / "run.json"
    run_cli("simulate", MODEL, "--scenario", TWO, "--out", run)
    assert run_cli("verify", MODEL, run) == 0
    capsys.readouterr()
    assert run_cli("mine", run, "--format", "json") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["turnedAwayCount"] == 1 and report["requestFrequency"] == {"s1": 2}
    assert run_cli("export", run, "--format", "dot", "--output", tmp_path / "run.dot") == 0
    assert (tmp_path / "run.dot").read_text().startswith("digraph run {")
    assert run_cli("export", run, "--format", "jsonl", "--output", tmp_path / "run.jsonl") == 0
    assert run_cli("mine", tmp_path / "run.jsonl", "--out", tmp_path / "report.json") == 0
    assert json.loads((tmp_path / "report.json").read_text()) == report


def test_verify_rejects_tampered_run(tmp_path, capsys):
    run = tmp_path / "run.json"
    run_cli("simulate", MODEL, "--scenario", ONE, "--out", run)
    doc = json.loads(run.read_text())
    doc["events"][2]["binding"]["e"] = "e2"  # j needs e in f(s1) = {e1}
    run.write_text(json.dumps(doc))
    assert run_cli("verify", MODEL, run) == 1
    assert "not enabled" in capsys.readouterr().err


def test_invariants_two_clients(capsys):
    assert run_cli("invariants", MODEL, "--scenario", TWO, "--resources", "P,G,R,S") == 0
    out = capsys.readouterr().out
    for name in ("twin", "experts", "rooms", "rejection", "typing", "termination"):
        assert f"  {name:<12} holds" in out


def test_invariants_truncated_is_failure(capsys):
    assert run_cli("invariants", MODEL, "--scenario", TWO, "--max-states", 5) == 1
    assert "(truncated)" in capsys.readouterr().out


def test_compose_expression_dot(capsys):
    assert run_cli("compose", MODEL, "--expr", "[clients] . [admin]", "--out", "dot") == 0
    dot = capsys.readouterr().out
    assert 'label="[clients]"' in dot and '"clients|R|b" -> "admin|L|b"' in dot


def test_instantiate_two_rooms(capsys):
    assert run_cli("instantiate", MODEL, "--structure", "two_rooms") == 0
    assert json.loads(capsys.readouterr().out)["marking"]["S"] == ["r1", "r2"]


def test_missing_file_is_reported(capsys):
    assert run_cli("check", "/nonexistent.hkl") == 2
    assert "cannot read /nonexistent.hkl" in capsys.readouterr().err


def test_mine_rejects_non_run(tmp_path, capsys):
    bogus = tmp_path / "x.json"
    bogus.write_text("{}")
    assert run_cli("mine", bogus) == 2
    assert "not a run file" in capsys.readouterr().err


def _cli(tmp, hashseed, *args):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    subprocess.run([sys.executable, "-m", "heraklit", *args], check=True, env=env, cwd=tmp, capture_output=True)


@pytest.mark.parametrize("args", [
    ("simulate", MODEL, "--scenario", TWO, "--out", "out.txt"),
    ("compose", MODEL, "--out", "dot", "--output", "out.txt"),
    ("instantiate", MODEL, "--output", "out.txt"),
])
def test_outputs_are_byte_identical_across_processes(tmp_path, args):
    texts = []
    for hashseed in (0, 1, 12345):
        _cli(tmp_path, hashseed, *args)
        texts.append((tmp_path / "out.txt").read_bytes())
    assert texts[0] == texts[1] == texts[2]
