"""Report-facing view of the fork-default table."""

from __future__ import annotations

from patchlab.chain.forks import FORK_DEFAULTS, Fork


def fork_defaults_table() -> dict[str, str]:
    table = {f"{major}.{minor}.x": fork.value
             for (major, minor), fork in sorted(FORK_DEFAULTS.items())}
    table["default"] = Fork.SHANGHAI.value
    return table
