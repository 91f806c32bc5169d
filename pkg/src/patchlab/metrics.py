"""Aggregate metrics over the tools × exploits outcome matrix.

Per-tool rates use the exploit count as denominator (contract-level
counting: a missing patch set still counts against the tool), and integer
percentages round half up, which reproduces the reference methodology's
published tables exactly (e.g. 67/91 = 73.63 -> 74, 29/91 = 31.87 -> 32).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from patchlab.errors import UnknownTool
from patchlab.harness import EvaluationOutcome, OutcomeKind
from patchlab.taxonomy import DaspCategory

# Best-first ordering for collapsing a tool's several patches into one cell.
_PRECEDENCE = [
    OutcomeKind.MITIGATED,
    OutcomeKind.NOT_MITIGATED,
    OutcomeKind.FUNCTIONAL_BROKEN,
    OutcomeKind.NO_DIFF,
    OutcomeKind.COMPILE_FAIL,
    OutcomeKind.TIMEOUT,
    OutcomeKind.INFRA_ERROR,
    OutcomeKind.NO_PATCH,
]
_RANK = {kind: rank for rank, kind in enumerate(_PRECEDENCE)}


def percent_round_half_up(count: int, total: int) -> int:
    """Integer percentage with exact half-up rounding (no float involved)."""
    if total <= 0:
        raise ValueError("total must be positive")
    return (200 * count + total) // (2 * total)


@dataclass
class OutcomeMatrix:
    tools: list[str]
    exploits: list[str]
    cells: dict[tuple[str, str], OutcomeKind] = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, tools: list[str], exploits: list[str],
                      outcomes: dict[tuple[str, str, str], EvaluationOutcome]) -> "OutcomeMatrix":
        """Collapse per-patch outcomes to per-(tool, exploit) best cells;
        missing patch sets become NO_PATCH."""
        matrix = cls(sorted(tools), sorted(exploits))
        for tool in matrix.tools:
            for exploit in matrix.exploits:
                kinds = [outcome.kind for (t, c, _p), outcome in outcomes.items()
                         if t == tool and c == exploit]
                best = min(kinds, key=_RANK.get, default=OutcomeKind.NO_PATCH)
                matrix.cells[(tool, exploit)] = best
        return matrix

    def cell(self, tool: str, exploit: str) -> OutcomeKind:
        return self.cells[(tool, exploit)]

    def _check_tool(self, tool: str) -> None:
        if tool not in self.tools:
            raise UnknownTool(tool)

    def count_for(self, tool: str, kind: OutcomeKind) -> int:
        self._check_tool(tool)
        return sum(1 for exploit in self.exploits
                   if self.cells[(tool, exploit)] is kind)


def mitigation_rate(matrix: OutcomeMatrix, tool: str) -> tuple[int, int]:
    count = matrix.count_for(tool, OutcomeKind.MITIGATED)
    return count, percent_round_half_up(count, len(matrix.exploits))


def functional_failure_rate(matrix: OutcomeMatrix, tool: str) -> tuple[int, int]:
    count = matrix.count_for(tool, OutcomeKind.FUNCTIONAL_BROKEN)
    return count, percent_round_half_up(count, len(matrix.exploits))


def unique_mitigations(matrix: OutcomeMatrix) -> dict[str, int]:
    """Exploits mitigated by exactly one tool, credited to that tool."""
    credit = {tool: 0 for tool in matrix.tools}
    for exploit in matrix.exploits:
        mitigators = [tool for tool in matrix.tools
                      if matrix.cells[(tool, exploit)] is OutcomeKind.MITIGATED]
        if len(mitigators) == 1:
            credit[mitigators[0]] += 1
    return credit


def global_coverage(matrix: OutcomeMatrix) -> tuple[int, int]:
    """(mitigated at least once, never mitigated) partition of the exploits."""
    covered = sum(
        1 for exploit in matrix.exploits
        if any(matrix.cells[(tool, exploit)] is OutcomeKind.MITIGATED
               for tool in matrix.tools))
    return covered, len(matrix.exploits) - covered


@dataclass(frozen=True)
class TypeRow:
    category: DaspCategory
    exploit_count: int
    per_tool: dict
    aggregate_mitigations: int
    effectiveness_percent: int


def per_type_effectiveness(matrix: OutcomeMatrix,
                           labels: dict[str, DaspCategory]) -> list[TypeRow]:
    """Mitigation effectiveness grouped by vulnerability type.

    Types with zero exploits never appear (no zero division).  Rows are
    ordered by descending exploit count, then category name.
    """
    groups: dict[DaspCategory, list[str]] = {}
    for exploit in matrix.exploits:
        groups.setdefault(labels[exploit], []).append(exploit)
    rows = []
    for category, members in groups.items():
        per_tool = {
            tool: sum(1 for exploit in members
                      if matrix.cells[(tool, exploit)] is OutcomeKind.MITIGATED)
            for tool in matrix.tools}
        aggregate = sum(
            1 for exploit in members
            if any(matrix.cells[(tool, exploit)] is OutcomeKind.MITIGATED
                   for tool in matrix.tools))
        rows.append(TypeRow(category, len(members), per_tool, aggregate,
                            percent_round_half_up(aggregate, len(members))))
    rows.sort(key=lambda row: (-row.exploit_count, row.category.value))
    return rows


@dataclass
class ToolMetrics:
    detected: int = 0
    generated_contracts: int = 0
    generated_patches: int = 0
    compilable_contracts: int = 0
    compilable_patches: int = 0
    different_contracts: int = 0
    different_patches: int = 0
    consistent_contracts: int = 0
    consistent_patches: int = 0
    functional_failures: int = 0
    functional_failures_percent: int = 0
    mitigated_total: int = 0
    mitigated_percent: int = 0
    mitigated_unique: int = 0

    def as_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class MetricsReport:
    per_tool: dict  # tool -> ToolMetrics
    per_type: list  # TypeRow
    mitigated_at_least_once: int
    never_mitigated: int
    exploit_count: int

    def as_dict(self) -> dict:
        return {
            "per_tool": {tool: metrics.as_dict()
                         for tool, metrics in sorted(self.per_tool.items())},
            "per_type": [
                {
                    "category": row.category.value,
                    "exploits": row.exploit_count,
                    "per_tool": dict(sorted(row.per_tool.items())),
                    "mitigations": row.aggregate_mitigations,
                    "effectiveness_percent": row.effectiveness_percent,
                }
                for row in self.per_type
            ],
            "global": {
                "exploits": self.exploit_count,
                "mitigated_at_least_once": self.mitigated_at_least_once,
                "never_mitigated": self.never_mitigated,
            },
        }


def build_metrics(matrix: OutcomeMatrix, labels: dict[str, DaspCategory],
                  static_summary: dict[str, dict] | None = None) -> MetricsReport:
    """Assemble the full metrics report from the matrix plus the static
    per-tool summary (detected / generated / compilable / different /
    consistent counts computed by the evaluation pipeline)."""
    unique = unique_mitigations(matrix)
    per_tool = {}
    for tool in matrix.tools:
        metrics = ToolMetrics()
        static = (static_summary or {}).get(tool, {})
        for field_name in ("detected", "generated_contracts", "generated_patches",
                           "compilable_contracts", "compilable_patches",
                           "different_contracts", "different_patches",
                           "consistent_contracts", "consistent_patches"):
            setattr(metrics, field_name, static.get(field_name, 0))
        metrics.mitigated_total, metrics.mitigated_percent = mitigation_rate(matrix, tool)
        metrics.functional_failures, metrics.functional_failures_percent = \
            functional_failure_rate(matrix, tool)
        metrics.mitigated_unique = unique[tool]
        per_tool[tool] = metrics
    covered, never = global_coverage(matrix)
    return MetricsReport(per_tool, per_type_effectiveness(matrix, labels),
                         covered, never, len(matrix.exploits))
