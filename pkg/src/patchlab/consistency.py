"""Detector-consistency checks and the per-patch static verdict.

A patch is consistent when the tool's own detector stops flagging the
target category on it entirely; a contract is consistent when at least one
of its patches is.  Side findings in other categories are reported
informationally and never affect the verdict.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from patchlab.detection import DetectionReport
from patchlab.taxonomy import DaspCategory


def patch_consistent(before: DetectionReport, after: DetectionReport,
                     target: DaspCategory) -> bool:
    """All instances of the target category detected before must be gone after.

    False when nothing of the target category was detected to begin with:
    there is nothing the patch can be credited with clearing.
    """
    return before.count(target) >= 1 and after.count(target) == 0


def contract_consistent(patch_verdicts: list[bool]) -> bool:
    """At least one patch of this tool/contract cleared all instances."""
    return any(patch_verdicts)


class Compiled(enum.Enum):
    YES = "yes"
    NO = "no"
    NOT_APPLICABLE = "not_applicable"  # bytecode-kind patches skip compilation


class Consistent(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"  # no post-patch detection report supplied


@dataclass(frozen=True)
class StaticVerdict:
    tool: str
    contract_id: str
    patch_id: str
    compiled: Compiled
    differs: bool  # defined even when compilation failed: source diff needs no compiler
    consistent: Consistent
    pragma_used: str = "n/a"  # patch | original | n/a

    def as_dict(self) -> dict:
        return {
            "tool": self.tool,
            "contract": self.contract_id,
            "patch": self.patch_id,
            "compiled": self.compiled.value,
            "differs": self.differs,
            "consistent": self.consistent.value,
            "pragma_used": self.pragma_used,
        }
