"""CLI integration over the bundled fixture set (real compiler + EVM)."""

import json
import shutil

import pytest

from patchlab.cli import main
from patchlab.pipeline import RunConfig, run_evaluation, run_validation, write_stamp
from patchlab.report import parse_report


@pytest.fixture()
def workspace(tmp_path, fixtures_dir, solc_cache):
    """Config pointing at the real fixtures with an isolated output dir."""
    config_path = tmp_path / "run.yaml"
    config_path.write_text(
        f"corpus_dir: {fixtures_dir / 'corpus'}\n"
        f"scenarios_dir: {fixtures_dir / 'scenarios'}\n"
        f"patches_dir: {fixtures_dir / 'patches'}\n"
        f"reports_dir: {fixtures_dir / 'reports'}\n"
        f"output_path: {tmp_path / 'out' / 'run_report.json'}\n"
        f"compiler_cache_dir: {solc_cache.root}\n"
        "workers: 1\n"
    )
    return config_path, tmp_path


def test_validate_then_evaluate_exit_codes(workspace, capsys):
    config_path, tmp_path = workspace
    assert main(["validate", "--config", str(config_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("ok   ") == 6

    assert main(["evaluate", "--config", str(config_path)]) == 0
    report = parse_report((tmp_path / "out" / "run_report.json").read_text())
    outcomes = {(o["tool"], o["contract"]): o["outcome"] for o in report["outcomes"]}
    assert outcomes[("tool_a", "simple_vault")] == "mitigated"
    assert outcomes[("tool_b", "simple_vault")] == "functional_broken"
    assert outcomes[("tool_a", "overflow_token")] == "mitigated"
    assert outcomes[("tool_b", "overflow_token")] == "not_mitigated"
    assert report["metrics"]["global"] == {
        "exploits": 6, "mitigated_at_least_once": 5, "never_mitigated": 1}


def test_evaluate_without_stamp_refuses(workspace):
    config_path, _tmp = workspace
    assert main(["evaluate", "--config", str(config_path)]) == 2


def test_evaluate_with_revalidate_needs_no_stamp(workspace):
    config_path, tmp_path = workspace
    assert main(["evaluate", "--config", str(config_path), "--revalidate",
                 "--tool", "tool_a"]) == 0
    report = parse_report((tmp_path / "out" / "run_report.json").read_text())
    assert {o["tool"] for o in report["outcomes"]} == {"tool_a"}


def test_stale_stamp_detected(workspace, fixtures_dir, tmp_path):
    config_path, workdir = workspace
    assert main(["validate", "--config", str(config_path)]) == 0
    # same inputs copied elsewhere invalidate nothing; edited inputs do
    corpus_copy = tmp_path / "corpus2"
    shutil.copytree(fixtures_dir / "corpus", corpus_copy)
    (corpus_copy / "reentrancy" / "simple_vault.sol").write_text(
        (corpus_copy / "reentrancy" / "simple_vault.sol").read_text() + "\n// touched\n")
    edited = tmp_path / "edited.yaml"
    edited.write_text(config_path.read_text().replace(
        str(fixtures_dir / "corpus"), str(corpus_copy)))
    assert main(["evaluate", "--config", str(edited)]) == 2


def test_unknown_tool_filter_exits_2(workspace):
    config_path, _tmp = workspace
    assert main(["validate", "--config", str(config_path)]) == 0
    assert main(["evaluate", "--config", str(config_path),
                 "--tool", "clippy"]) == 2


def test_empty_scenarios_dir_warns_and_exits_zero(tmp_path, fixtures_dir, solc_cache, capsys):
    empty = tmp_path / "scenarios"
    empty.mkdir()
    config_path = tmp_path / "run.yaml"
    config_path.write_text(
        f"corpus_dir: {fixtures_dir / 'corpus'}\n"
        f"scenarios_dir: {empty}\n"
        f"patches_dir: {fixtures_dir / 'patches'}\n"
        f"reports_dir: {fixtures_dir / 'reports'}\n"
        f"output_path: {tmp_path / 'out.json'}\n"
        f"compiler_cache_dir: {solc_cache.root}\n"
    )
    assert main(["validate", "--config", str(config_path)]) == 0
    assert "warning" in capsys.readouterr().out


def test_missing_contract_listed(tmp_path, fixtures_dir, solc_cache, capsys):
    scenarios = tmp_path / "scenarios"
    shutil.copytree(fixtures_dir / "scenarios", scenarios)
    orphan = (scenarios / "orphan.yaml")
    orphan.write_text(
        (fixtures_dir / "scenarios" / "overflow_token.yaml").read_text().replace(
            "contract_id: overflow_token", "contract_id: ghost_contract"))
    config_path = tmp_path / "run.yaml"
    config_path.write_text(
        f"corpus_dir: {fixtures_dir / 'corpus'}\n"
        f"scenarios_dir: {scenarios}\n"
        f"patches_dir: {fixtures_dir / 'patches'}\n"
        f"reports_dir: {fixtures_dir / 'reports'}\n"
        f"output_path: {tmp_path / 'out.json'}\n"
        f"compiler_cache_dir: {solc_cache.root}\n"
    )
    assert main(["validate", "--config", str(config_path)]) == 1
    assert "MissingContract" in capsys.readouterr().out


def test_report_command_renders_tables(workspace, capsys):
    config_path, tmp_path = workspace
    assert main(["evaluate", "--config", str(config_path), "--revalidate"]) == 0
    capsys.readouterr()
    report_path = tmp_path / "out" / "run_report.json"
    assert main(["report", str(report_path), "--format", "table"]) == 0
    out = capsys.readouterr().out
    assert "Static patch assessment" in out
    assert "Per-type effectiveness" in out

    csv_path = tmp_path / "matrix.csv"
    assert main(["report", str(report_path), "--csv", str(csv_path)]) == 0
    assert csv_path.read_text().startswith("contract,tool_a,tool_b")


def test_report_command_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"schema_version\": 1")
    assert main(["report", str(bad)]) == 2


def test_static_summary_matches_designed_reports(workspace):
    config_path, tmp_path = workspace
    config = RunConfig.from_file(config_path)
    write_stamp(config)
    report = run_evaluation(config)
    tool_a = report["metrics"]["per_tool"]["tool_a"]
    tool_b = report["metrics"]["per_tool"]["tool_b"]
    assert tool_a["detected"] == 6
    assert tool_b["detected"] == 5  # wrong category on the roulette case
    assert tool_a["consistent_patches"] == 5
    # tool_b: partial clearing on simple_vault and a no-detection roulette case
    assert tool_b["consistent_patches"] == 4
    assert tool_a["mitigated_unique"] == 5
    assert tool_b["mitigated_total"] == 0


def test_validation_run_reports_all_ok(workspace):
    config_path, _tmp = workspace
    run = run_validation(RunConfig.from_file(config_path))
    assert run.ok
    assert len(run.reports) == 6


def test_infra_error_outcomes_drive_nonzero_exit(workspace, tmp_path, fixtures_dir):
    # a patch demanding a compiler release the cache cannot satisfy is an
    # infrastructure failure, never a scientific verdict
    config_path, workdir = workspace
    patches = tmp_path / "patches2"
    shutil.copytree(fixtures_dir / "patches", patches)
    hopeless = patches / "tool_b" / "simple_vault" / "patch_1.sol"
    hopeless.write_text("pragma solidity ^0.9.99;\ncontract Reentrancy {}\n")
    edited = tmp_path / "infra.yaml"
    edited.write_text(config_path.read_text().replace(
        str(fixtures_dir / "patches"), str(patches)))
    assert main(["evaluate", "--config", str(edited), "--revalidate"]) == 1
    report = parse_report((workdir / "out" / "run_report.json").read_text())
    outcome = {(o["tool"], o["contract"], o["patch"]): o["outcome"]
               for o in report["outcomes"]}
    assert outcome[("tool_b", "simple_vault", "patch_1")] == "infra_error"
    # verdicts for everything else are unaffected
    assert outcome[("tool_b", "simple_vault", "patch_0")] == "functional_broken"
