"""DASP vulnerability taxonomy and tool-label mapping.

The ten categories form a closed set: a label that maps to none of them is
an error, never a silent Other.  Tool-specific label spellings live in a
versioned category-map file shipped with the framework (and extensible per
deployment) so the pipeline stays tool-agnostic.
"""

from __future__ import annotations

import enum
from pathlib import Path

from patchlab.errors import SchemaError, UnknownLabel

_DATA_DIR = Path(__file__).parent / "data"
DEFAULT_CATEGORY_MAP = _DATA_DIR / "category_map.csv"


class DaspCategory(enum.Enum):
    REENTRANCY = "reentrancy"
    ACCESS_CONTROL = "access_control"
    ARITHMETIC = "arithmetic"
    UNCHECKED_LOW_LEVEL_CALLS = "unchecked_low_level_calls"
    DENIAL_OF_SERVICE = "denial_of_service"
    BAD_RANDOMNESS = "bad_randomness"
    FRONT_RUNNING = "front_running"
    TIME_MANIPULATION = "time_manipulation"
    SHORT_ADDRESSES = "short_addresses"
    OTHER = "other"


class ExploitabilityStatus(enum.Enum):
    EXPLOITABLE = "exploitable"
    THEORETICAL_PROBLEM = "theoretical_problem"
    MISSING_ENTRY_POINT = "missing_entry_point"
    SOLIDITY_VERSION = "solidity_version"
    TIME_LIMIT_EXCEEDED = "time_limit_exceeded"
    HONEYPOT_OR_HASH_CRACKING = "honeypot_or_hash_cracking"


_CANONICAL = {category.value: category for category in DaspCategory}


def category_from_canonical(label: str, tool: str = "dataset") -> DaspCategory:
    """Resolve a canonical snake_case spelling, case-insensitively."""
    category = _CANONICAL.get(label.strip().lower())
    if category is None:
        raise UnknownLabel(tool, label)
    return category


class CategoryMap:
    """tool/raw-label -> DASP lookup table.

    File format: `tool,raw_label,dasp_category` per line; `*` as the tool
    matches any tool; `#` comments and blank lines are ignored.  Canonical
    DASP spellings resolve for every tool without a table entry.
    """

    def __init__(self, entries: dict[tuple[str, str], DaspCategory] | None = None):
        self._entries = dict(entries or {})

    @classmethod
    def load(cls, path: str | Path = DEFAULT_CATEGORY_MAP) -> "CategoryMap":
        entries: dict[tuple[str, str], DaspCategory] = {}
        for line_no, raw_line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise SchemaError(f"{path}:{line_no}", "expected tool,raw_label,dasp_category")
            tool, raw_label, category_name = parts
            entries[(tool.lower(), raw_label.lower())] = category_from_canonical(
                category_name, tool="category-map")
        return cls(entries)

    def lookup(self, tool: str, raw_label: str) -> DaspCategory:
        tool_key = tool.strip().lower()
        label_key = raw_label.strip().lower()
        for key in ((tool_key, label_key), ("*", label_key)):
            if key in self._entries:
                return self._entries[key]
        if label_key in _CANONICAL:  # identity spelling works for any tool
            return _CANONICAL[label_key]
        raise UnknownLabel(tool, raw_label)


def map_tool_category(tool: str, raw_label: str, mapping: CategoryMap) -> DaspCategory:
    """Deterministic, case-insensitive tool-label resolution."""
    return mapping.lookup(tool, raw_label)
