"""Solidity pragma parsing and compiler-version selection.

Supports the comparator grammar solc itself accepts in pragmas:
bare versions (exact), `=`, `>`, `>=`, `<`, `<=`, caret and tilde ranges.
`||` alternatives never appear in dataset-style corpora and raise
UnparsableConstraint rather than being silently misread.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from patchlab.errors import NoPragma, UnparsableConstraint, Unsatisfiable

Version = tuple[int, int, int]

# Official solc release line (plain x.y.z releases as published on the
# solc-js registry). Used to flag unsatisfiable constraints with context;
# actual selection always runs over the caller-provided available set.
KNOWN_COMPILER_RELEASES: tuple[str, ...] = tuple(
    f"0.4.{p}" for p in [*range(0, 12), *range(13, 27)]
) + tuple(
    f"0.5.{p}" for p in range(0, 18)
) + tuple(
    f"0.6.{p}" for p in range(0, 13)
) + tuple(
    f"0.7.{p}" for p in range(0, 7)
) + tuple(
    f"0.8.{p}" for p in range(0, 37)
)


def parse_version(text: str) -> Version:
    parts = text.strip().split(".")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise UnparsableConstraint(text)
    return (int(parts[0]), int(parts[1]), int(parts[2]))


def format_version(version: Version) -> str:
    return ".".join(str(p) for p in version)


_OPS = {
    "<": lambda v, b: v < b,
    "<=": lambda v, b: v <= b,
    ">": lambda v, b: v > b,
    ">=": lambda v, b: v >= b,
    "=": lambda v, b: v == b,
}


@dataclass(frozen=True)
class Clause:
    op: str
    bound: Version

    def satisfied_by(self, version: Version) -> bool:
        return _OPS[self.op](version, self.bound)

    def __str__(self) -> str:
        return f"{self.op}{format_version(self.bound)}"


@dataclass(frozen=True)
class VersionConstraint:
    """Conjunction of comparator clauses over semantic versions."""

    clauses: tuple[Clause, ...]

    def satisfied_by(self, version: str | Version) -> bool:
        if isinstance(version, str):
            version = parse_version(version)
        return all(clause.satisfied_by(version) for clause in self.clauses)

    def satisfiable(self, releases: tuple[str, ...] = KNOWN_COMPILER_RELEASES) -> bool:
        return any(self.satisfied_by(r) for r in releases)

    def intersect(self, other: "VersionConstraint") -> "VersionConstraint":
        return VersionConstraint(self.clauses + other.clauses)

    def __str__(self) -> str:
        return " ".join(str(c) for c in self.clauses) or "*"


def _next_caret_bound(version: Version) -> Version:
    major, minor, patch = version
    if major > 0:
        return (major + 1, 0, 0)
    if minor > 0:
        return (0, minor + 1, 0)
    return (0, 0, patch + 1)


def _expand_token(token: str) -> list[Clause]:
    token = token.strip()
    if token.startswith("^"):
        base = parse_version(token[1:])
        return [Clause(">=", base), Clause("<", _next_caret_bound(base))]
    if token.startswith("~"):
        base = parse_version(token[1:])
        return [Clause(">=", base), Clause("<", (base[0], base[1] + 1, 0))]
    match = re.match(r"^(>=|<=|>|<|=)\s*(.+)$", token)
    if match:
        return [Clause(match.group(1), parse_version(match.group(2)))]
    # bare version means exact
    return [Clause("=", parse_version(token))]


def parse_constraint_expression(expression: str) -> VersionConstraint:
    """Parse one pragma expression like `>=0.4.24 <0.6.0` or `^0.4.24`."""
    expression = expression.strip().rstrip(";").strip()
    if "||" in expression:
        raise UnparsableConstraint(expression)
    if not expression:
        raise UnparsableConstraint(expression)
    # Normalize so comparator and version never get split apart.
    normalized = re.sub(r"(>=|<=|>|<|=|\^|~)\s+", r"\1", expression)
    clauses: list[Clause] = []
    for token in normalized.split():
        clauses.extend(_expand_token(token))
    return VersionConstraint(tuple(clauses))


_PRAGMA = re.compile(r"pragma\s+solidity\s+([^;]+);")


def parse_pragma(source: str) -> VersionConstraint:
    """Intersection of every `pragma solidity` directive in the file."""
    matches = _PRAGMA.findall(source)
    if not matches:
        raise NoPragma("source has no `pragma solidity` directive")
    constraint = parse_constraint_expression(matches[0])
    for extra in matches[1:]:
        constraint = constraint.intersect(parse_constraint_expression(extra))
    return constraint


def select_compiler(constraint: VersionConstraint, available: list[str]) -> str:
    """Highest available version satisfying the constraint.

    `available` holds exact version strings; order does not matter, the
    result is the maximum satisfying element.
    """
    best: Version | None = None
    for candidate in available:
        version = parse_version(candidate)
        if constraint.satisfied_by(version) and (best is None or version > best):
            best = version
    if best is None:
        raise Unsatisfiable(constraint, available)
    return format_version(best)
