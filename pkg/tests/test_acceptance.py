"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line.  Run with `pytest tests/test_acceptance.py -v -s` to see the lines.

The headline study-scale numbers need the full 143-contract corpus and
seven external repair tools; these criteria instead reproduce the worked
examples exactly and pin every aggregate formula to its published value.
"""

import json
import random
import time
from contextlib import contextmanager

import pytest

from patchlab.chain import Actor, BlockContext, EmbeddedBackend
from patchlab.compiler import Compiler
from patchlab.consistency import contract_consistent, patch_consistent
from patchlab.detection import Defect, DetectionReport
from patchlab.diffing import bytecode_differs, source_differs
from patchlab.harness import BuildContext, OutcomeKind, evaluate_patch, validate_scenario
from patchlab.corpus import load_corpus
from patchlab.metrics import (
    OutcomeMatrix,
    functional_failure_rate,
    global_coverage,
    mitigation_rate,
    per_type_effectiveness,
    percent_round_half_up,
    unique_mitigations,
)
from patchlab.patches import load_patches
from patchlab.pipeline import RunConfig, run_evaluation, write_stamp
from patchlab.scenario import load_scenarios_dir
from patchlab.taxonomy import DaspCategory

from tests import test_backend_conformance as conformance


@contextmanager
def criterion(number: int, description: str):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {number} FAIL: {description}")
        raise
    elapsed = time.monotonic() - started
    print(f"\nACCEPTANCE {number} PASS ({elapsed:.1f}s): {description}")


@pytest.fixture(scope="module")
def fixture_env(fixtures_dir, solc_cache):
    corpus = load_corpus(fixtures_dir / "corpus")
    scenarios = load_scenarios_dir(fixtures_dir / "scenarios")
    patches = {p.key: p for p in load_patches(fixtures_dir / "patches")}
    build = BuildContext(Compiler(solc_cache))
    return corpus, scenarios, patches, build


def _config_for(tmp_path, fixtures_dir, solc_cache, workers: int) -> RunConfig:
    return RunConfig(
        corpus_dir=fixtures_dir / "corpus",
        scenarios_dir=fixtures_dir / "scenarios",
        patches_dir=fixtures_dir / "patches",
        reports_dir=fixtures_dir / "reports",
        output_path=tmp_path / f"out{workers}" / "run_report.json",
        workers=workers,
        compiler_cache_dir=solc_cache.root,
    )


def test_criterion_1_reentrancy_end_to_end(fixture_env):
    corpus, scenarios, patches, build = fixture_env
    with criterion(1, "reentrancy end-to-end: exploit fires on original, "
                      "effective patch Mitigated, breaking patch FunctionalBroken, < 60 s"):
        started = time.monotonic()
        backend = EmbeddedBackend()
        scenario = scenarios["simple_vault"]
        case = corpus.get("simple_vault")

        validation = validate_scenario(scenario, case, backend, build)
        assert validation.ok, validation
        assert validation.exploit_succeeded  # attacker ends above their stake

        effective = patches[("tool_a", "simple_vault", "patch_0")]
        outcome, _ = evaluate_patch(case, effective, scenario, backend, build)
        assert outcome.kind is OutcomeKind.MITIGATED, outcome

        breaking = patches[("tool_b", "simple_vault", "patch_0")]
        outcome, _ = evaluate_patch(case, breaking, scenario, backend, build)
        assert outcome.kind is OutcomeKind.FUNCTIONAL_BROKEN, outcome
        # the failing withdraw step is identified by check name and step index
        assert "deposit_withdraw_round_trip" in outcome.detail
        assert "[1]" in outcome.detail

        assert time.monotonic() - started < 60


def _matrix_with(count: int, total: int = 91) -> OutcomeMatrix:
    matrix = OutcomeMatrix(["t"], [f"e{i:03d}" for i in range(total)])
    for i in range(total):
        matrix.cells[("t", f"e{i:03d}")] = (
            OutcomeKind.MITIGATED if i < count else OutcomeKind.NOT_MITIGATED)
    return matrix


def test_criterion_2_study_percentages():
    with criterion(2, "published mitigation/functional percentages reproduced exactly"):
        mitigated = (30, 44, 48, 67, 45, 29, 26)
        expected = (33, 48, 53, 74, 49, 32, 29)
        computed = tuple(mitigation_rate(_matrix_with(c), "t")[1] for c in mitigated)
        assert computed == expected, computed

        failures = (1, 0, 4, 7, 1, 26, 21)
        expected_failures = (1, 0, 4, 8, 1, 29, 23)
        computed_failures = []
        for count in failures:
            matrix = _matrix_with(0)
            for i in range(count):
                matrix.cells[("t", f"e{i:03d}")] = OutcomeKind.FUNCTIONAL_BROKEN
            computed_failures.append(functional_failure_rate(matrix, "t")[1])
        assert tuple(computed_failures) == expected_failures, computed_failures


TYPE_TABLE = [
    (DaspCategory.UNCHECKED_LOW_LEVEL_CALLS, 20, 19, 95),
    (DaspCategory.REENTRANCY, 26, 26, 100),
    (DaspCategory.ACCESS_CONTROL, 16, 13, 81),
    (DaspCategory.ARITHMETIC, 13, 13, 100),
    (DaspCategory.BAD_RANDOMNESS, 4, 4, 100),
    (DaspCategory.DENIAL_OF_SERVICE, 4, 0, 0),
    (DaspCategory.TIME_MANIPULATION, 3, 2, 67),
    (DaspCategory.FRONT_RUNNING, 3, 1, 33),
    (DaspCategory.OTHER, 2, 2, 100),
]


def test_criterion_3_per_type_arithmetic():
    with criterion(3, "per-type effectiveness table and 80/91 -> 88% aggregate"):
        labels = {}
        matrix = OutcomeMatrix(["t"], [])
        index = 0
        for category, total, mitigated, _pct in TYPE_TABLE:
            for i in range(total):
                exploit = f"e{index:03d}"
                index += 1
                matrix.exploits.append(exploit)
                labels[exploit] = category
                matrix.cells[("t", exploit)] = (
                    OutcomeKind.MITIGATED if i < mitigated else OutcomeKind.NOT_MITIGATED)
        assert len(matrix.exploits) == 91

        rows = {row.category: row for row in per_type_effectiveness(matrix, labels)}
        for category, total, mitigated, pct in TYPE_TABLE:
            row = rows[category]
            assert (row.exploit_count, row.aggregate_mitigations,
                    row.effectiveness_percent) == (total, mitigated, pct), category

        covered, never = global_coverage(matrix)
        assert (covered, never) == (80, 11)
        assert percent_round_half_up(covered, 91) == 88


def test_criterion_4_unique_mitigation_oracle():
    with criterion(4, "unique mitigations equal brute-force single-true column "
                      "scans on 200 random 7x91 matrices"):
        rng = random.Random(0xDA5B)
        for _ in range(200):
            rows = [[rng.random() < 0.4 for _ in range(91)] for _ in range(7)]
            matrix = OutcomeMatrix([f"t{i}" for i in range(7)],
                                   [f"e{j:03d}" for j in range(91)])
            for i, row in enumerate(rows):
                for j, hit in enumerate(row):
                    matrix.cells[(f"t{i}", f"e{j:03d}")] = (
                        OutcomeKind.MITIGATED if hit else OutcomeKind.NO_PATCH)
            unique = unique_mitigations(matrix)
            for j in range(91):
                column = [rows[i][j] for i in range(7)]
                if sum(column) == 1:
                    winner = f"t{column.index(True)}"
                    assert unique[winner] >= 1
            brute = [0] * 7
            for j in range(91):
                column = [rows[i][j] for i in range(7)]
                if sum(column) == 1:
                    brute[column.index(True)] += 1
            assert [unique[f"t{i}"] for i in range(7)] == brute
            covered, _ = global_coverage(matrix)
            assert sum(unique.values()) <= covered


def test_criterion_5_consistency_semantics():
    with criterion(5, "patch-level all-instances and contract-level any-patch "
                      "semantics match brute force on randomized reports"):
        rng = random.Random(0x5EC)
        categories = sorted(DaspCategory, key=lambda c: c.value)

        def random_report():
            cats = [rng.choice(categories) for _ in range(rng.randrange(0, 6))]
            return DetectionReport("x.sol", tuple(
                Defect((i + 1,), c, c.value) for i, c in enumerate(cats)))

        for _ in range(500):
            before, after = random_report(), random_report()
            target = rng.choice(categories)
            expected = (sum(1 for d in before.defects if d.category == target) >= 1
                        and sum(1 for d in after.defects if d.category == target) == 0)
            assert patch_consistent(before, after, target) == expected

        for _ in range(200):
            verdicts = [rng.random() < 0.3 for _ in range(rng.randrange(0, 8))]
            brute = False
            for verdict in verdicts:
                brute = brute or verdict
            assert contract_consistent(verdicts) == brute


def test_criterion_6_backend_conformance():
    with criterion(6, "conformance suite passes identically on mock and "
                      "embedded backends, < 2 min"):
        started = time.monotonic()
        checks = [name for name in dir(conformance) if name.startswith("test_")]
        for harness in (conformance.EmbeddedHarness(), conformance.MockHarness()):
            for name in checks:
                getattr(conformance, name)(harness)
        assert time.monotonic() - started < 120


def test_criterion_7_differential_analysis(compiler):
    with criterion(7, "cosmetic source changes and metadata-only bytecode "
                      "changes compare equal; real changes differ"):
        original = (
            "pragma solidity ^0.4.24;\n"
            "contract A { uint x;\n"
            "  function f() public { x = x + 1; } }\n")
        cosmetic = (
            "pragma solidity ^0.4.24;\n"
            "// a comment\ncontract A {\n    uint   x;\n"
            "  function f() public {\n    x = x + 1; /* note */ }\n}\n")
        semantic = original.replace("x + 1", "x + 2")
        assert source_differs(original, cosmetic) is False
        assert source_differs(original, semantic) is True

        one = compiler.compile(original, "0.4.26", source_name="a.sol")[0]
        two = compiler.compile(original, "0.4.26", source_name="b.sol")[0]
        assert one.runtime_bytecode != two.runtime_bytecode  # metadata differs
        assert bytecode_differs(one.runtime_bytecode, two.runtime_bytecode) is False
        patched = one.runtime_bytecode[:8] + b"\x5b" + one.runtime_bytecode[8:]
        assert bytecode_differs(one.runtime_bytecode, patched) is True


def test_criterion_8_worker_determinism(tmp_path, fixtures_dir, solc_cache):
    with criterion(8, "workers=1 and workers=4 produce byte-identical metrics"):
        serial = _config_for(tmp_path, fixtures_dir, solc_cache, workers=1)
        parallel = _config_for(tmp_path, fixtures_dir, solc_cache, workers=4)
        write_stamp(serial)
        write_stamp(parallel)
        report_serial = run_evaluation(serial)
        report_parallel = run_evaluation(parallel)
        bytes_serial = json.dumps(report_serial["metrics"], sort_keys=True).encode()
        bytes_parallel = json.dumps(report_parallel["metrics"], sort_keys=True).encode()
        assert bytes_serial == bytes_parallel


MECHANICS = [
    ("overflow_token", OutcomeKind.NOT_MITIGATED),
    ("silent_escrow", OutcomeKind.NOT_MITIGATED),
    ("open_treasury", OutcomeKind.FUNCTIONAL_BROKEN),
    ("timestamp_roulette", OutcomeKind.NOT_MITIGATED),
]


def test_criterion_9_vulnerability_mechanics(fixture_env):
    corpus, scenarios, patches, build = fixture_env
    with criterion(9, "arithmetic/unchecked-call/access-control/time scenarios "
                      "validate and classify their patch pairs correctly"):
        backend = EmbeddedBackend()
        for contract_id, bad_kind in MECHANICS:
            scenario = scenarios[contract_id]
            case = corpus.get(contract_id)
            validation = validate_scenario(scenario, case, backend, build)
            assert validation.ok, (contract_id, validation)

            good = patches[("tool_a", contract_id, "patch_0")]
            outcome, _ = evaluate_patch(case, good, scenario, backend, build)
            assert outcome.kind is OutcomeKind.MITIGATED, (contract_id, outcome)

            bad = patches[("tool_b", contract_id, "patch_0")]
            outcome, _ = evaluate_patch(case, bad, scenario, backend, build)
            assert outcome.kind is bad_kind, (contract_id, outcome)
