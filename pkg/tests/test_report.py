from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from monoslicer.candidates import AnalysisConfig, Dedupe, SyncCase, parse_annotations
from monoslicer.cli import CONFIG_ENV, main
from monoslicer.decomposition import UnknownSubsystem
from monoslicer.model import CallEdge, SystemModel
from monoslicer.report import ValidationFailed, analyze, load_reports, render, run_pipeline
from synthetic import banking, load, write_fixture

BA = "BusinessActions"
BA_FC = "AUTCCErspSolAutCceNov"


@pytest.fixture(scope="module")
def bank(tmp_path_factory):
    b, notes = banking()
    return write_fixture(b, notes, tmp_path_factory.mktemp("bank"), "bank")


def test_banking_pipeline(bank):
    reports = run_pipeline(bank["model"], bank["areas"], bank["annotations"])
    assert [r.subsystem for r in reports] == sorted(r.subsystem for r in reports)
    outcomes = {r.subsystem: str(r.recommendation) for r in reports}
    assert outcomes == {
        "BusinessActions": "Migrate",
        "Checks": "Migrate",
        "Clients": "DoNotMigrate(excess-split-effort)",
        "SMSChannel": "Migrate",
        "ServiceCharges": "Migrate",
    }
    rows = {r.subsystem: (r.metrics.as_tuple(), r.candidate_count) for r in reports}
    assert rows["BusinessActions"] == ((3, 5, 3, 6), 1)
    assert rows["ServiceCharges"] == ((10, 62, 79, 14), 3)
    assert rows["Checks"] == ((5, 29, 14, 22), 8)
    assert rows["SMSChannel"] == ((6, 138, 133, 140), 4)
    tables, functions, calls, accesses = rows["Clients"][0]
    assert tables == 1 and functions > 150 and calls > 150 and accesses == 26


def test_report_invariants(bank):
    for r in run_pipeline(bank["model"], bank["areas"], bank["annotations"]):
        assert r.candidate_count == len(r.candidates)
        for row in r.candidates:
            assert sum(row.case_counts.values()) == len(row.gateways) == len(row.candidate.facades)


def test_filter(fixtures_dir):
    reports = run_pipeline(
        fixtures_dir / "business_actions.json", fixtures_dir / "business_actions_areas.csv", subsystems=[BA]
    )
    (r,) = reports
    assert r.metrics.as_tuple() == (3, 5, 3, 6)
    assert r.candidate_count == 1


def test_unknown_filter(business):
    with pytest.raises(UnknownSubsystem):
        analyze(*business, subsystems=["Nope"])


def test_validation_fails_fast(business):
    model, areas = business
    bad = SystemModel(
        model.facades,
        model.functions,
        model.tables,
        model.call_edges + (CallEdge(BA_FC, "AUTPOScltBen", 3),),
        model.access_edges,
        model.signatures,
    )
    with pytest.raises(ValidationFailed) as err:
        analyze(bad, areas)
    assert BA_FC in str(err.value.violations[0])


def test_render_empty():
    assert render([], "json") == b"[]\n"
    assert render([], "json") == render([], "json")


def test_json_round_trip(bank):
    reports = run_pipeline(bank["model"], bank["areas"], bank["annotations"])
    first = render(reports, "json")
    assert render(load_reports(first), "json") == first
    doc = json.loads(first)
    ba = next(d for d in doc if d["subsystem"] == BA)
    assert ba["candidates"][0]["gateway_cases"] == {"SequentialI": 2, "IndependentII": 0, "SplitIII": 0}


def test_markdown(business, business_notes):
    reports = analyze(*business, annotations=business_notes).reports
    md = render(reports, "markdown").decode()
    assert "- Name: BusinessActions.ListBusinessActionsForAccount" in md
    assert md == render(reports, "markdown").decode()
    for label, value in [
        ("Tables (vertices)", 3),
        ("Functions (vertices)", 5),
        ("Function calls (edges)", 3),
        ("Database accesses (edges)", 6),
        ("Microservices candidates", 1),
    ]:
        assert f"| {label} | {value} |" in md
    for part in ("- Purpose:", "- Input/Output:", "- Features:", "- Data: ACB, ACO, RCA", "Recommendation: **Migrate**"):
        assert part in md


def test_render_rejects_unknown_format():
    with pytest.raises(ValueError):
        render([], "html")


# -- CLI -------------------------------------------------------------------------------------------


def run_cli(args, capsys):
    code = main(["analyze", *map(str, args)])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_success(fixtures_dir, capsys):
    code, out, _ = run_cli(
        [
            "--model", fixtures_dir / "business_actions.json",
            "--areas", fixtures_dir / "business_actions_areas.csv",
            "--annotations", fixtures_dir / "business_actions_annotations.json",
            "--format", "markdown",
        ],
        capsys,
    )
    assert code == 0
    assert "BusinessActions.ListBusinessActionsForAccount" in out


def test_cli_missing_file(tmp_path, fixtures_dir, capsys):
    code, out, err = run_cli(["--model", tmp_path / "nope.json", "--areas", fixtures_dir / "two_facades_areas.csv"], capsys)
    assert code == 2 and out == "" and "nope.json" in err


def test_cli_malformed_file(tmp_path, fixtures_dir, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"facades": [')
    code, out, _ = run_cli(["--model", bad, "--areas", fixtures_dir / "two_facades_areas.csv"], capsys)
    assert code == 2 and out == ""


def test_cli_schema_error(tmp_path, fixtures_dir, capsys):
    doc = json.loads((fixtures_dir / "two_facades.json").read_text())
    del doc["signatures"]["bf1"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run_cli(["--model", bad, "--areas", fixtures_dir / "two_facades_areas.csv"], capsys)
    assert code == 2 and "signatures.bf1" in err


def test_cli_ordinal_gap(tmp_path, fixtures_dir, capsys):
    doc = json.loads((fixtures_dir / "two_facades.json").read_text())
    doc["calls"][2]["ordinal"] = 3
    bad = tmp_path / "gap.json"
    bad.write_text(json.dumps(doc))
    code, out, err = run_cli(["--model", bad, "--areas", fixtures_dir / "two_facades_areas.csv"], capsys)
    assert code == 3 and out == ""
    assert "OrdinalGap" in err


def test_cli_unknown_subsystem(fixtures_dir, capsys):
    code, _, err = run_cli(
        ["--model", fixtures_dir / "two_facades.json", "--areas", fixtures_dir / "two_facades_areas.csv", "--subsystem", "zz"], capsys
    )
    assert code == 2 and "zz" in err


def test_cli_config_env_and_flag(tmp_path, monkeypatch, bank, capsys):
    loose = tmp_path / "loose.json"
    loose.write_text(json.dumps({"max_split_gateways": 60}))
    strict = tmp_path / "strict.json"
    strict.write_text(json.dumps({"max_split_gateways": 0}))
    base = ["--model", bank["model"], "--areas", bank["areas"], "--subsystem", "Clients"]

    def outcome(extra):
        code, out, _ = run_cli(base + extra, capsys)
        assert code == 0
        return json.loads(out)[0]["recommendation"]["outcome"]

    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert outcome([]) == "DoNotMigrate"
    monkeypatch.setenv(CONFIG_ENV, str(loose))
    assert outcome([]) == "Migrate"
    assert outcome(["--config", strict]) == "DoNotMigrate"
    monkeypatch.setenv(CONFIG_ENV, str(strict))
    assert outcome(["--config", loose]) == "Migrate"


def test_cli_dot_and_output(tmp_path, fixtures_dir, capsys):
    out_file = tmp_path / "report.json"
    dot_dir = tmp_path / "dot"
    code, out, _ = run_cli(
        [
            "--model", fixtures_dir / "two_facades.json",
            "--areas", fixtures_dir / "two_facades_areas.csv",
            "--dot", dot_dir,
            "-o", out_file,
        ],
        capsys,
    )
    assert code == 0 and out == ""
    assert [d["subsystem"] for d in json.loads(out_file.read_text())] == ["ss1", "ss2", "ss3"]
    assert sorted(p.name for p in dot_dir.iterdir()) == ["monolith.dot", "ss1.dot", "ss2.dot", "ss3.dot"]
    assert (dot_dir / "ss3.dot").read_text().startswith('digraph "ss3"')


def test_cli_is_deterministic(tmp_path, fixtures_dir, capsys):
    args = ["--model", fixtures_dir / "business_actions.json", "--areas", fixtures_dir / "business_actions_areas.csv"]
    assert run_cli(args, capsys)[1] == run_cli(args, capsys)[1]


def test_module_entry_point(fixtures_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "monoslicer", "analyze",
         "--model", str(fixtures_dir / "two_facades.json"), "--areas", str(fixtures_dir / "two_facades_areas.csv")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)[0]["subsystem"] == "ss1"


def test_console_script_installed():
    assert shutil.which("monoslicer") is not None


def test_business_case_counts(business, business_notes):
    (r,) = analyze(*business, annotations=business_notes).reports
    assert r.candidates[0].case_counts[SyncCase.SEQUENTIAL_I] == 2
    assert analyze(*business, config=AnalysisConfig(dedupe=Dedupe.OFF)).reports[0].candidate_count == 5


def test_annotations_from_list(business):
    notes = parse_annotations(json.dumps([{"subsystem": BA, "functions": sorted(business[0].functions), "name": "X"}]))
    (r,) = analyze(*business, annotations=notes).reports
    assert r.candidates[0].candidate.name == "BusinessActions.X"


def test_load_helper_matches_fixture_files():
    model, areas = load("business_actions")
    assert areas.areas == {BA}
