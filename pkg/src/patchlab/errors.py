"""Exception types shared across the framework.

Scientific verdicts (a patch failing to compile, an exploit surviving) are
never exceptions — they are outcomes.  Exceptions mean the input or the
infrastructure is broken.
"""

from __future__ import annotations


class PatchLabError(Exception):
    """Base class for all framework errors."""


class SchemaError(PatchLabError):
    """A structured document violates its schema. Carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class UnknownLabel(PatchLabError):
    """A vulnerability label that maps to no DASP category."""

    def __init__(self, tool: str, raw_label: str):
        self.tool = tool
        self.raw_label = raw_label
        super().__init__(
            f"no DASP mapping for label {raw_label!r} from tool {tool!r}; "
            "extend the category-map file to cover it"
        )


class CorpusError(PatchLabError):
    """A contract case violates a corpus invariant (bad annotation, manifest mismatch)."""


class NoPragma(PatchLabError):
    """Source contains no `pragma solidity` directive."""


class UnparsableConstraint(PatchLabError):
    """A pragma expression outside the supported comparator grammar."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"cannot parse version constraint: {text!r}")


class Unsatisfiable(PatchLabError):
    """No available compiler release satisfies the constraint."""

    def __init__(self, constraint, available):
        self.constraint = constraint
        self.available = list(available)
        super().__init__(
            f"constraint {constraint} unsatisfiable over available versions {self.available}"
        )


class ToolchainMissing(PatchLabError):
    """The compiler for an exact version is not cached and may not be fetched."""

    def __init__(self, version: str, detail: str = ""):
        self.version = version
        super().__init__(f"compiler {version} not available" + (f": {detail}" if detail else ""))


class CompileError(PatchLabError):
    """Compilation failed; carries the compiler's diagnostics verbatim."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics) or "compilation failed")


class ChainError(PatchLabError):
    """Base class for execution-backend errors."""


class DuplicateActor(ChainError):
    pass


class InsufficientFunds(ChainError):
    pass


class NonMonotonicContext(ChainError):
    pass


class UnknownSnapshot(ChainError):
    pass


class DanglingActor(SchemaError):
    """A scenario step references an actor handle that was never declared."""

    def __init__(self, handle: str, path: str = ""):
        self.handle = handle
        SchemaError.__init__(self, path or handle, f"undeclared actor {handle!r}")


class UnknownTool(PatchLabError):
    pass


class InfraFailure(PatchLabError):
    """Unexpected infrastructure fault during evaluation (surfaces as an InfraError outcome)."""
