"""Run-report persistence and rendering.

The canonical machine format is JSON with sorted keys and a frozen field
set (schema_version 1, additive evolution only); rendering it back through
`parse_report` round-trips exactly.  The table format mirrors the three
summary tables reviewers expect: static assessment, exploit outcomes, and
per-type effectiveness.
"""

from __future__ import annotations

import json
from pathlib import Path

from patchlab.errors import SchemaError

SCHEMA_VERSION = 1

_REQUIRED_SECTIONS = ("schema_version", "run_config", "corpus",
                      "static_verdicts", "outcomes", "metrics")


def assemble_report(run_config: dict, corpus_info: dict,
                    static_verdicts: list[dict], outcomes: list[dict],
                    metrics: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_config": run_config,
        "corpus": corpus_info,
        "static_verdicts": sorted(
            static_verdicts, key=lambda v: (v["tool"], v["contract"], v["patch"])),
        "outcomes": sorted(
            outcomes, key=lambda o: (o["tool"], o["contract"], o["patch"])),
        "metrics": metrics,
    }


def render_machine(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> dict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("$", "report must be an object")
    for key in _REQUIRED_SECTIONS:
        if key not in document:
            raise SchemaError(key, "required section missing")
    if document["schema_version"] != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported: {document['schema_version']}")
    return document


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(render_machine(report))


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(row):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def render_tables(report: dict) -> str:
    metrics = report["metrics"]
    per_tool = metrics["per_tool"]
    sections = []

    rows = []
    for tool, m in sorted(per_tool.items()):
        rows.append([
            tool, str(m["detected"]),
            f"{m['generated_contracts']}/{m['generated_patches']}",
            f"{m['compilable_contracts']}/{m['compilable_patches']}",
            f"{m['different_contracts']}/{m['different_patches']}",
            f"{m['consistent_contracts']}/{m['consistent_patches']}",
        ])
    sections.append("Static patch assessment (contracts/patches)\n" + _format_table(
        ["tool", "detected", "generated", "compilable", "different", "consistent"],
        rows))

    rows = []
    for tool, m in sorted(per_tool.items()):
        rows.append([
            tool,
            f"{m['functional_failures']} ({m['functional_failures_percent']}%)",
            f"{m['mitigated_total']} ({m['mitigated_percent']}%)",
            str(m["mitigated_unique"]),
        ])
    sections.append("Exploit outcomes\n" + _format_table(
        ["tool", "failed functional checks", "mitigated", "unique"], rows))

    tools = sorted(per_tool)
    rows = []
    for entry in metrics["per_type"]:
        rows.append([entry["category"], str(entry["exploits"])]
                    + [str(entry["per_tool"].get(tool, 0)) for tool in tools]
                    + [str(entry["mitigations"]), f"{entry['effectiveness_percent']}%"])
    global_section = metrics["global"]
    rows.append(["total", str(global_section["exploits"])]
                + ["-"] * len(tools)
                + [str(global_section["mitigated_at_least_once"]),
                   f"{_total_percent(global_section)}%"])
    sections.append("Per-type effectiveness\n" + _format_table(
        ["type", "exploits", *tools, "mitigated", "effectiveness"], rows))

    return "\n\n".join(sections) + "\n"


def _total_percent(global_section: dict) -> int:
    from patchlab.metrics import percent_round_half_up

    if global_section["exploits"] == 0:
        return 0
    return percent_round_half_up(global_section["mitigated_at_least_once"],
                                 global_section["exploits"])


def export_matrix_csv(report: dict, path: str | Path) -> None:
    """Outcome matrix as CSV: one row per exploit, one column per tool."""
    import csv

    cells: dict[tuple[str, str], str] = {}
    tools = sorted({o["tool"] for o in report["outcomes"]})
    exploits = sorted({o["contract"] for o in report["outcomes"]})
    from patchlab.harness import OutcomeKind
    from patchlab.metrics import OutcomeMatrix, _RANK

    for exploit in exploits:
        for tool in tools:
            kinds = [OutcomeKind(o["outcome"]) for o in report["outcomes"]
                     if o["tool"] == tool and o["contract"] == exploit]
            best = min(kinds, key=_RANK.get, default=OutcomeKind.NO_PATCH)
            cells[(tool, exploit)] = best.value

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["contract", *tools])
        for exploit in exploits:
            writer.writerow([exploit, *(cells[(tool, exploit)] for tool in tools)])
