"""Contract corpus: annotated vulnerable contracts and their layout on disk.

Corpus layout: one directory per DASP category (lower-snake names), `.sol`
files inside; an optional `manifest.yaml` at the corpus root overrides
per-file ground truth and exploitability:

    overflow_token:
      exploitability: exploitable
    broken_thing:
      ground_truth: access_control
      exploitability: theoretical_problem
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from patchlab.errors import CorpusError, UnknownLabel
from patchlab.taxonomy import DaspCategory, ExploitabilityStatus, category_from_canonical

# `// <yes> <report> LABEL` with arbitrary interior whitespace; dataset
# files vary in spacing.
ANNOTATION_MARKER = re.compile(r"//\s*<yes>\s*<report>\s*([A-Za-z_][A-Za-z0-9_]*)")


def parse_annotations(source: str) -> list[tuple[int, DaspCategory]]:
    """Ground-truth markers in a contract source.

    The reported line is the first non-blank line after each marker
    comment (the vulnerable statement itself, per dataset convention);
    markers with nothing after them are dropped.  Output is sorted by
    line number.  Raises UnknownLabel for a marker naming no category.
    """
    lines = source.splitlines()
    found: list[tuple[int, DaspCategory]] = []
    for index, line in enumerate(lines):
        match = ANNOTATION_MARKER.search(line)
        if not match:
            continue
        category = category_from_canonical(match.group(1), tool="annotation")
        for follow in range(index + 1, len(lines)):
            if lines[follow].strip():
                found.append((follow + 1, category))  # 1-based
                break
    found.sort(key=lambda entry: entry[0])
    return found


@dataclass(frozen=True)
class ContractCase:
    id: str
    ground_truth: DaspCategory
    source: str | None = None
    runtime_bytecode: bytes | None = None
    annotated_lines: tuple = ()
    exploitability: ExploitabilityStatus = ExploitabilityStatus.EXPLOITABLE

    def __post_init__(self):
        if (self.source is None) == (self.runtime_bytecode is None):
            raise CorpusError(
                f"{self.id}: exactly one of source / runtime_bytecode required")
        if self.source is not None:
            line_count = len(self.source.splitlines())
            for line, _ in self.annotated_lines:
                if not 1 <= line <= line_count:
                    raise CorpusError(
                        f"{self.id}: annotated line {line} outside 1..{line_count}")
        if self.annotated_lines and all(
                category != self.ground_truth for _, category in self.annotated_lines):
            raise CorpusError(
                f"{self.id}: ground truth {self.ground_truth.value} matches no annotation")

    @property
    def is_multi_label(self) -> bool:
        return len({category for _, category in self.annotated_lines}) > 1

    @property
    def kind(self) -> str:
        return "source" if self.source is not None else "bytecode"


@dataclass
class Corpus:
    cases: dict[str, ContractCase] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.cases.values())

    def __len__(self):
        return len(self.cases)

    def get(self, contract_id: str) -> ContractCase | None:
        return self.cases.get(contract_id)

    def exploitability_counts(self) -> dict[ExploitabilityStatus, int]:
        counts = {status: 0 for status in ExploitabilityStatus}
        for case in self:
            counts[case.exploitability] += 1
        return counts

    def multi_label_ids(self) -> list[str]:
        return sorted(case.id for case in self if case.is_multi_label)


_CATEGORY_DIRS = {category.value: category for category in DaspCategory}


def load_corpus(root: str | Path) -> Corpus:
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    manifest = {}
    manifest_path = root / "manifest.yaml"
    if manifest_path.is_file():
        manifest = yaml.safe_load(manifest_path.read_text()) or {}

    corpus = Corpus()
    for category_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        category = _CATEGORY_DIRS.get(category_dir.name)
        if category is None:
            raise CorpusError(
                f"{category_dir.name} is not a DASP category directory")
        for path in sorted(category_dir.iterdir()):
            if path.suffix not in (".sol", ".bin"):
                continue
            case_id = path.stem
            if case_id in corpus.cases:
                raise CorpusError(f"duplicate contract id {case_id}")
            overrides = manifest.get(case_id, {})
            ground_truth = category
            if "ground_truth" in overrides:
                ground_truth = category_from_canonical(overrides["ground_truth"],
                                                       tool="manifest")
            exploitability = ExploitabilityStatus.EXPLOITABLE
            if "exploitability" in overrides:
                try:
                    exploitability = ExploitabilityStatus(overrides["exploitability"])
                except ValueError as exc:
                    raise CorpusError(
                        f"{case_id}: unknown exploitability "
                        f"{overrides['exploitability']!r}") from exc
            if path.suffix == ".sol":
                source = path.read_text()
                case = ContractCase(
                    id=case_id, ground_truth=ground_truth, source=source,
                    annotated_lines=tuple(parse_annotations(source)),
                    exploitability=exploitability)
            else:
                case = ContractCase(
                    id=case_id, ground_truth=ground_truth,
                    runtime_bytecode=bytes.fromhex(path.read_text().strip()),
                    exploitability=exploitability)
            corpus.cases[case_id] = case
    return corpus
