from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from spec_anvil.cli import main

from conftest import COSTS, REPLAY, TOY_CORPUS, TOY_SCRIPTS, TOY_SPECS, write_corpus


def make_config(tmp_path, scripts="campaign", **extra):
    doc = {
        "corpus_path": str(TOY_CORPUS),
        "backends": {role: {"kind": "scripted", "fixtures_dir": str(TOY_SCRIPTS / scripts)}
                     for role in ("architect", "engineer", "fixer")},
        "run_dir": str(tmp_path / "runs"),
        **extra,
    }
    path = tmp_path / f"config-{scripts}.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# corpus validate
# ---------------------------------------------------------------------------

def test_corpus_validate_toy(capsys):
    assert main(["corpus", "validate", str(TOY_CORPUS)]) == 0
    assert "10/10 defects valid" in capsys.readouterr().out


def test_corpus_validate_findings(tmp_path, capsys):
    write_corpus(tmp_path, fixed="def f(x):\n    return 0\n")
    assert main(["corpus", "validate", str(tmp_path)]) == 1
    assert "d1: Fixed tree" in capsys.readouterr().out


def test_corpus_validate_schema_error(tmp_path, capsys):
    write_corpus(tmp_path, modified_files=[])
    assert main(["corpus", "validate", str(tmp_path)]) == 4
    assert "modified_files" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_run_writes_artifacts(tmp_path, capsys):
    assert main(["run", "calc-5", "--mode", "enlightened", "--config", make_config(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "outcome: CorrectFix" in out and "rqa: validated" in out
    root = tmp_path / "runs" / "calc-5-enlightened"
    (rec,) = read_jsonl(root / "sessions.jsonl")
    assert rec["outcome"] == "CorrectFix" and rec["mode"] == "enlightened"
    assert (root / "artifacts" / "calc-5" / "enlightened" / "spec.feature").is_file()


@pytest.mark.parametrize("defect,code", [("calc-4", 10), ("calc-5", 11)])
def test_run_exit_codes(tmp_path, defect, code):
    assert main(["run", defect, "--config", make_config(tmp_path), "--run-id", "x"]) == code


def test_run_degraded(tmp_path, capsys):
    cfg = make_config(tmp_path, "degraded")
    code = main(["run", "calc-5", "--mode", "enlightened", "--config", cfg, "--max-rqa-attempts", "1"])
    assert code == 11
    assert "(degraded)" in capsys.readouterr().out


def test_run_unknown_defect(tmp_path, capsys):
    assert main(["run", "nope", "--config", make_config(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err


def test_run_rejects_zero_attempts(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", "calc-1", "--config", make_config(tmp_path), "--max-rqa-attempts", "0"])
    assert info.value.code == 2


@pytest.mark.parametrize("doc,needle", [
    ("{", "config"),
    ('{"corpus_path": "x", "backends": {}}', "backend"),
    ('{"corpus_path": "x", "backends": {"fixer": {"kind": "remote", "api_key": "k"}}}', "environment variable"),
])
def test_config_errors(tmp_path, capsys, doc, needle):
    path = tmp_path / "bad.json"
    path.write_text(doc)
    assert main(["run", "calc-1", "--config", str(path)]) == 3
    assert needle in capsys.readouterr().err


# ---------------------------------------------------------------------------
# campaign
# ---------------------------------------------------------------------------

def test_campaign_workers_deterministic_and_resumable(tmp_path, capsys):
    cfg = make_config(tmp_path)
    assert main(["campaign", "--config", cfg, "--composite", "--campaign-id", "w1"]) == 0
    assert main(["campaign", "--config", cfg, "--composite", "--workers", "4", "--campaign-id", "w4"]) == 0
    runs = tmp_path / "runs"
    assert (runs / "w1" / "outcomes.jsonl").read_text() == (runs / "w4" / "outcomes.jsonl").read_text()
    assert (runs / "w1" / "report.md").read_text() == (runs / "w4" / "report.md").read_text()
    assert "| **Total** | **10** | **6** | **4** | **3** | **9** | **90.00%** |" in (runs / "w1" / "report.md").read_text()
    log = runs / "w1" / "sessions.jsonl"
    before = log.read_bytes()
    assert len(read_jsonl(log)) == 14
    capsys.readouterr()
    assert main(["campaign", "--config", cfg, "--composite", "--campaign-id", "w1"]) == 0
    assert "resuming: 14 session(s)" in capsys.readouterr().out
    assert log.read_bytes() == before


def test_campaign_resume_after_truncated_log(tmp_path):
    cfg = make_config(tmp_path)
    assert main(["campaign", "--config", cfg, "--campaign-id", "c"]) == 0
    log = tmp_path / "runs" / "c" / "sessions.jsonl"
    lines = log.read_text().splitlines(keepends=True)
    assert len(lines) == 10
    log.write_text("".join(lines[:-1]) + lines[-1][:20])
    assert main(["campaign", "--config", cfg, "--campaign-id", "c"]) == 0
    records = read_jsonl(log)
    assert len(records) == 10 and len({r["defect_id"] for r in records}) == 10


def test_report_from_run_directory(tmp_path, capsys):
    cfg = make_config(tmp_path)
    assert main(["campaign", "--config", cfg, "--composite", "--campaign-id", "r"]) == 0
    capsys.readouterr()
    assert main(["report", "--run", str(tmp_path / "runs" / "r")]) == 0
    out = capsys.readouterr().out
    assert "Rescued 3 of 4 blind failures: 75.0%" in out
    assert "## Cost breakdown" in out and "| Architect | 4 |" in out


# ---------------------------------------------------------------------------
# verify-spec
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("feature,code", [
    ("calc-5/spec.feature", 0),
    ("calc-5/vacuous.feature", 20),
    ("calc-5/misaligned.feature", 21),
])
def test_verify_spec_verdicts(capsys, feature, code):
    args = ["verify-spec", "calc-5", str(TOY_SPECS / feature), str(TOY_SPECS / "bindings.json"),
            "--corpus", str(TOY_CORPUS)]
    assert main(args) == code
    out = capsys.readouterr().out
    assert out.startswith("verdict: ")
    if code == 20:
        assert "fixed: not run" in out


def test_verify_spec_harness_error(tmp_path):
    feature = tmp_path / "h.feature"
    feature.write_text("Feature: h\n  Scenario: s\n    Given setup breaks\n    Then nothing\n")
    bindings = tmp_path / "b.json"
    bindings.write_text(json.dumps({"bindings": [
        {"pattern": "^setup breaks$", "command": '{python} -c "raise SystemExit(2)"'},
        {"pattern": "^nothing$", "command": "{python} -c pass"},
    ]}))
    args = ["verify-spec", "calc-5", str(feature), str(bindings), "--corpus", str(TOY_CORPUS)]
    assert main(args) == 22


def test_verify_spec_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.feature"
    bad.write_text("Scenario: no feature\n")
    args = ["verify-spec", "calc-5", str(bad), str(TOY_SPECS / "bindings.json"), "--corpus", str(TOY_CORPUS)]
    assert main(args) == 23
    args = ["verify-spec", "calc-5", str(TOY_SPECS / "calc-5" / "spec.feature"),
            str(TOY_SPECS / "broken-bindings.json"), "--corpus", str(TOY_CORPUS)]
    assert main(args) == 24
    assert "binding error" in capsys.readouterr().err


def test_verify_spec_negative_only_json(capsys):
    args = ["verify-spec", "calc-5", str(TOY_SPECS / "calc-5" / "spec.feature"), str(TOY_SPECS / "bindings.json"),
            "--corpus", str(TOY_CORPUS), "--negative-only", "--json"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "provisional, negative-only" in out and "fixed: not run" in out
    doc = json.loads(out[out.index("{"):])
    assert doc["verdict"]["kind"] == "Validated"


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def test_report_replay_with_costs(capsys):
    assert main(["report", "--replay", str(REPLAY), "--costs", str(COSTS)]) == 0
    out = capsys.readouterr().out
    assert "| **Total** | **680** | **520** | **160** | **119** | **639** | **93.97%** |" in out
    assert "| Mockito | 38 | 32 | 6 | 6 | 38 | 100.0% |" in out
    assert "Rescued 119 of 160 blind failures: 74.4%" in out
    assert "| **Total** | **100** | **1261.08** | **139.40** | **5,782,441** | **100.0%** |" in out


def test_report_csv_to_file(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["report", "--replay", str(REPLAY), "--format", "csv", "--output", str(out)]) == 0
    assert "total,Total,680,520,160,119,639,93.97" in out.read_text()


def test_report_empty_and_bad_input(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["report", "--replay", str(empty)]) == 0
    assert "no sessions" in capsys.readouterr().out
    bad = tmp_path / "bad.jsonl"
    shutil.copy(REPLAY, bad)
    with bad.open("a") as fh:
        fh.write('{"defect_id": "zz"}\n')
    assert main(["report", "--replay", str(bad)]) == 5
    assert "bad.jsonl:681:" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spec_anvil", "report", "--replay", str(REPLAY), "--format", "csv"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.startswith("section,name,")
