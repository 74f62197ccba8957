import json
import shutil
import subprocess
import sys

import pytest

from conftest import FIXTURES
from execreport.cli import (EXIT_BLOWUP, EXIT_BUG, EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_ORACLE_FAIL, EXIT_PARSE,
                            EXIT_UNKNOWN, main, render)
from execreport.report import ExecutionReport, ReportedTrace


@pytest.fixture
def work(tmp_path):
    for f in FIXTURES.glob("*.mc"):
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def _fig1_pipeline(work):
    mc = str(work / "fig1.mc")
    assert main(["verify", mc, "--entry", "test_min", "--loop-bound", "3"]) == EXIT_UNKNOWN
    assert main(["report", mc, "--automaton", str(work / "fig1.aa.json")]) == EXIT_OK
    return mc


def test_verify_exit_codes(work, capsys):
    assert main(["verify", str(work / "trivial_safe.mc")]) == EXIT_OK
    assert "SAFE" in capsys.readouterr().out
    bug = work / "bug.mc"
    bug.write_text("int main() { int x = nondet(); assert(x != 2); return 0; }\n")
    assert main(["verify", str(bug)]) == EXIT_BUG
    assert "inputs [2]" in capsys.readouterr().out
    bad = work / "bad.mc"
    bad.write_text("int main( {")
    assert main(["verify", str(bad)]) == EXIT_PARSE
    assert main(["verify", str(work / "missing.mc")]) == EXIT_IO


def test_fig1_end_to_end(work, capsys):
    mc = _fig1_pipeline(work)
    doc = json.loads((work / "fig1.er.json").read_text())
    assert doc["S"] and doc["F"]
    args = ["oracle-check", mc, "--automaton", str(work / "fig1.aa.json"), "--report", str(work / "fig1.er.json")]
    assert main(args) == EXIT_OK
    doc["F"].append(dict(doc["F"][0], edges=doc["F"][0]["edges"][:-1]))
    (work / "tampered.er.json").write_text(json.dumps(doc))
    args[-1] = str(work / "tampered.er.json")
    assert main(args) == EXIT_ORACLE_FAIL
    assert "membership violation" in capsys.readouterr().out


def test_oracle_check_blow_up_and_vacuous(work, capsys):
    mc = _fig1_pipeline(work)
    base = ["oracle-check", mc, "--automaton", str(work / "fig1.aa.json"), "--report", str(work / "fig1.er.json")]
    assert main(base + ["--max-steps", "50"]) == EXIT_BLOWUP
    capsys.readouterr()
    assert main(base + ["--max-length", "1"]) == EXIT_OK
    assert "vacuous" in capsys.readouterr().out


def test_report_hash_mismatch(work):
    _fig1_pipeline(work)
    other = work / "trivial_safe.mc"
    assert main(["report", str(other), "--automaton", str(work / "fig1.aa.json")]) == EXIT_MISMATCH
    bad = work / "bad.aa.json"
    bad.write_text("{")
    assert main(["report", str(other), "--automaton", str(bad)]) == EXIT_PARSE


def test_fig2_report_then_branch(work, capsys):
    mc = str(work / "fig2_scaled.mc")
    assert main(["verify", mc, "--opaque-multiplication", "--emit-automaton", str(work / "fig2.aa.json")]) == EXIT_UNKNOWN
    assert main(["report", mc, "--automaton", str(work / "fig2.aa.json"), "--component", "S"]) == EXIT_OK
    doc = json.loads((work / "fig2_scaled.er.json").read_text())
    assert [t["statements"] for t in doc["S"]] == [["int p = nondet();", "assume(p);"]]
    assert doc["F"] == [] and doc["status"]["F"] == "not-requested"


def test_show(work, capsys):
    _fig1_pipeline(work)
    capsys.readouterr()
    assert main(["show", str(work / "fig1.er.json"), "--source", str(work / "fig1.mc")]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("S: 5 traces, F: 6 traces")
    assert "lines 18, 19 -> TRUE" in out


def test_render_examples():
    assert render(ExecutionReport()) == "S: 0 traces, F: 0 traces"
    t1 = ReportedTrace(("a",), (0,), (3,), ("x = 1;",), 7)
    t2 = ReportedTrace(("b",), (1,), (4,), ("x = 2;",), 7)
    text = render(ExecutionReport(S=[t1, t2], status={"S": "fully-enumerated", "F": "fully-enumerated"}))
    assert text.count("end location 7:") == 1
    assert "lines 3 -> TRUE" in text and "lines 4 -> TRUE" in text


def test_module_entry_point(work):
    proc = subprocess.run([sys.executable, "-m", "execreport", "verify", str(work / "trivial_safe.mc")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK and proc.stdout.strip() == "SAFE"
