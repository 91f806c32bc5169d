"""Metric arithmetic: published-table reproductions and brute-force oracles."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from patchlab.errors import UnknownTool
from patchlab.harness import EvaluationOutcome, OutcomeKind
from patchlab.metrics import (
    OutcomeMatrix,
    build_metrics,
    functional_failure_rate,
    global_coverage,
    mitigation_rate,
    per_type_effectiveness,
    percent_round_half_up,
    unique_mitigations,
)
from patchlab.taxonomy import DaspCategory

M = OutcomeKind.MITIGATED
N = OutcomeKind.NOT_MITIGATED
F = OutcomeKind.FUNCTIONAL_BROKEN


def matrix_from_grid(grid: dict[str, dict[str, OutcomeKind]]) -> OutcomeMatrix:
    tools = sorted(grid)
    exploits = sorted({e for row in grid.values() for e in row})
    matrix = OutcomeMatrix(tools, exploits)
    for tool in tools:
        for exploit in exploits:
            matrix.cells[(tool, exploit)] = grid[tool].get(exploit, OutcomeKind.NO_PATCH)
    return matrix


def boolean_matrix(rows: list[list[bool]]) -> OutcomeMatrix:
    tools = [f"t{i}" for i in range(len(rows))]
    exploits = [f"e{j:03d}" for j in range(len(rows[0]))]
    matrix = OutcomeMatrix(tools, exploits)
    for i, row in enumerate(rows):
        for j, mitigated in enumerate(row):
            matrix.cells[(tools[i], exploits[j])] = M if mitigated else N
    return matrix


# --- percentage arithmetic pinned to the published tables ---

def test_percent_examples():
    assert percent_round_half_up(67, 91) == 74
    assert percent_round_half_up(26, 91) == 29
    assert percent_round_half_up(0, 91) == 0


MITIGATION_TABLE = list(zip((30, 44, 48, 67, 45, 29, 26), (33, 48, 53, 74, 49, 32, 29)))
FUNCTIONAL_TABLE = list(zip((1, 0, 4, 7, 1, 26, 21), (1, 0, 4, 8, 1, 29, 23)))


@pytest.mark.parametrize("count,expected", MITIGATION_TABLE)
def test_mitigation_percent_column(count, expected):
    assert percent_round_half_up(count, 91) == expected


@pytest.mark.parametrize("count,expected", FUNCTIONAL_TABLE)
def test_functional_percent_column(count, expected):
    assert percent_round_half_up(count, 91) == expected


PER_TYPE_TABLE = [
    (19, 20, 95), (26, 26, 100), (13, 16, 81), (13, 13, 100), (4, 4, 100),
    (0, 4, 0), (2, 3, 67), (1, 3, 33), (2, 2, 100),
]


@pytest.mark.parametrize("count,total,expected", PER_TYPE_TABLE)
def test_per_type_percent_column(count, total, expected):
    assert percent_round_half_up(count, total) == expected


def test_global_aggregate_percent():
    assert percent_round_half_up(80, 91) == 88


@given(st.integers(0, 10_000), st.integers(1, 10_000))
def test_percent_equals_fraction_oracle(count, total):
    # independent oracle: exact rational arithmetic with explicit half-up
    exact = Fraction(count * 100, total)
    floor = exact.numerator // exact.denominator
    remainder = exact - floor
    expected = floor + (1 if remainder >= Fraction(1, 2) else 0)
    assert percent_round_half_up(count, total) == expected


# --- rates over a matrix ---

def test_rates_count_cells_and_round():
    rows = [[True] * 67 + [False] * 24]
    matrix = boolean_matrix(rows)
    assert mitigation_rate(matrix, "t0") == (67, 74)


def test_functional_rate():
    matrix = boolean_matrix([[False] * 91])
    for j in range(26):
        matrix.cells[("t0", f"e{j:03d}")] = F
    assert functional_failure_rate(matrix, "t0") == (26, 29)


def test_unknown_tool_rejected():
    matrix = boolean_matrix([[True]])
    with pytest.raises(UnknownTool):
        mitigation_rate(matrix, "nope")


def test_no_patch_counts_in_denominator():
    matrix = matrix_from_grid({"t0": {"e0": M}})
    matrix.exploits = ["e0", "e1"]
    matrix.cells[("t0", "e1")] = OutcomeKind.NO_PATCH
    assert mitigation_rate(matrix, "t0") == (1, 50)


# --- unique mitigations vs brute force (the 200-sample oracle) ---

def brute_force_unique(rows: list[list[bool]]) -> list[int]:
    tools = len(rows)
    exploits = len(rows[0])
    credit = [0] * tools
    for j in range(exploits):
        column = [rows[i][j] for i in range(tools)]
        if sum(column) == 1:
            credit[column.index(True)] += 1
    return credit


def test_unique_mitigations_matches_brute_force_on_200_random_matrices():
    rng = random.Random(91)
    for _ in range(200):
        rows = [[rng.random() < 0.5 for _ in range(91)] for _ in range(7)]
        matrix = boolean_matrix(rows)
        unique = unique_mitigations(matrix)
        expected = brute_force_unique(rows)
        assert [unique[f"t{i}"] for i in range(7)] == expected
        covered, _ = global_coverage(matrix)
        assert sum(unique.values()) <= covered


def test_all_tools_mitigate_everything_gives_zero_uniques():
    matrix = boolean_matrix([[True] * 5, [True] * 5])
    assert set(unique_mitigations(matrix).values()) == {0}


@given(st.lists(st.lists(st.booleans(), min_size=4, max_size=4), min_size=2, max_size=5))
def test_coverage_equals_row_wise_or_oracle(rows):
    matrix = boolean_matrix(rows)
    any_scan = sum(1 for j in range(4) if any(row[j] for row in rows))
    assert global_coverage(matrix) == (any_scan, 4 - any_scan)


# --- per-type table ---

def test_per_type_rows():
    labels = {
        "e0": DaspCategory.REENTRANCY,
        "e1": DaspCategory.REENTRANCY,
        "e2": DaspCategory.ARITHMETIC,
    }
    matrix = matrix_from_grid({
        "t0": {"e0": M, "e1": N, "e2": N},
        "t1": {"e0": N, "e1": M, "e2": N},
    })
    rows = per_type_effectiveness(matrix, labels)
    assert [row.category for row in rows] == [DaspCategory.REENTRANCY, DaspCategory.ARITHMETIC]
    reentrancy, arithmetic = rows
    assert reentrancy.exploit_count == 2
    assert reentrancy.aggregate_mitigations == 2
    assert reentrancy.effectiveness_percent == 100
    assert reentrancy.per_tool == {"t0": 1, "t1": 1}
    assert arithmetic.aggregate_mitigations == 0
    assert arithmetic.effectiveness_percent == 0


def test_types_without_exploits_are_excluded():
    labels = {"e0": DaspCategory.REENTRANCY}
    matrix = matrix_from_grid({"t0": {"e0": M}})
    categories = {row.category for row in per_type_effectiveness(matrix, labels)}
    assert DaspCategory.SHORT_ADDRESSES not in categories


# --- matrix collapsing and report assembly ---

def test_best_outcome_precedence():
    outcomes = {
        ("t0", "e0", "p0"): EvaluationOutcome(OutcomeKind.FUNCTIONAL_BROKEN),
        ("t0", "e0", "p1"): EvaluationOutcome(OutcomeKind.MITIGATED),
        ("t0", "e0", "p2"): EvaluationOutcome(OutcomeKind.COMPILE_FAIL),
    }
    matrix = OutcomeMatrix.from_outcomes(["t0"], ["e0"], outcomes)
    assert matrix.cell("t0", "e0") is OutcomeKind.MITIGATED


def test_missing_patches_become_no_patch():
    matrix = OutcomeMatrix.from_outcomes(["t0"], ["e0"], {})
    assert matrix.cell("t0", "e0") is OutcomeKind.NO_PATCH


def test_metrics_report_invariant():
    labels = {"e0": DaspCategory.REENTRANCY, "e1": DaspCategory.ARITHMETIC}
    matrix = matrix_from_grid({
        "t0": {"e0": M, "e1": F},
        "t1": {"e0": N, "e1": N},
    })
    report = build_metrics(matrix, labels)
    assert report.mitigated_at_least_once + report.never_mitigated == report.exploit_count
    assert report.per_tool["t0"].mitigated_total == 1
    assert report.per_tool["t0"].functional_failures == 1
    assert report.per_tool["t0"].mitigated_unique == 1


def test_aggregation_permutation_invariant():
    labels = {"e0": DaspCategory.REENTRANCY, "e1": DaspCategory.ARITHMETIC,
              "e2": DaspCategory.REENTRANCY}
    grid = {"t0": {"e0": M, "e1": N, "e2": F}, "t1": {"e0": N, "e1": M, "e2": M}}
    forward = matrix_from_grid(grid)
    shuffled = matrix_from_grid(grid)
    shuffled.exploits = list(reversed(shuffled.exploits))
    a = build_metrics(forward, labels).as_dict()
    b = build_metrics(shuffled, labels).as_dict()
    assert a == b
