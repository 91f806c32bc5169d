"""Detection reports produced by repair tools' detectors.

Wire schema (bit-exact with the common user-provided detection format):

    {"name": "FibonacciBalance.sol",
     "defect": [{"lines": [31, 38], "category": "access_control"}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from patchlab.corpus import ContractCase
from patchlab.errors import SchemaError
from patchlab.taxonomy import CategoryMap, DaspCategory, map_tool_category


@dataclass(frozen=True)
class Defect:
    lines: tuple[int, ...]
    category: DaspCategory
    raw_label: str


@dataclass(frozen=True)
class DetectionReport:
    contract_name: str
    defects: tuple[Defect, ...]

    def categories(self) -> set[DaspCategory]:
        return {defect.category for defect in self.defects}

    def count(self, category: DaspCategory) -> int:
        return sum(1 for defect in self.defects if defect.category == category)


def parse_detection_report(document: str | dict, tool: str,
                           mapping: CategoryMap) -> DetectionReport:
    """Parse and validate one report; raw labels are preserved and the
    category is resolved through the tool's mapping table."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("$", "report must be an object")
    name = document.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError("name", "required non-empty string")
    defects_raw = document.get("defect")
    if not isinstance(defects_raw, list):
        raise SchemaError("defect", "required array")
    defects = []
    for index, entry in enumerate(defects_raw):
        path = f"defect[{index}]"
        if not isinstance(entry, dict):
            raise SchemaError(path, "must be an object")
        lines = entry.get("lines")
        if not isinstance(lines, list) or not lines or \
                not all(isinstance(n, int) and n >= 1 for n in lines):
            raise SchemaError(f"{path}.lines", "non-empty array of positive integers")
        raw_label = entry.get("category")
        if not isinstance(raw_label, str) or not raw_label:
            raise SchemaError(f"{path}.category", "required non-empty string")
        category = map_tool_category(tool, raw_label, mapping)
        defects.append(Defect(tuple(lines), category, raw_label))
    return DetectionReport(name, tuple(defects))


def detection_matches_ground_truth(report: DetectionReport, case: ContractCase) -> bool:
    """Contract-level match: some defect carries the ground-truth category.

    Line agreement is informational (see `line_overlap`), not required.
    """
    return any(defect.category == case.ground_truth for defect in report.defects)


def line_overlap(report: DetectionReport, case: ContractCase) -> int:
    """How many annotated vulnerable lines the report also names (informational)."""
    reported = {line for defect in report.defects for line in defect.lines}
    return sum(1 for line, _ in case.annotated_lines if line in reported)
