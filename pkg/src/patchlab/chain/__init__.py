"""Execution substrate: an embedded EVM backend and a scripted mock."""

from patchlab.chain.base import (
    Actor,
    BlockContext,
    TxResult,
    TxStatus,
    BalanceOf,
    StorageAt,
    CodeAt,
)
from patchlab.chain.backend import EmbeddedBackend
from patchlab.chain.mock import MockBackend, MockScript

__all__ = [
    "Actor",
    "BlockContext",
    "TxResult",
    "TxStatus",
    "BalanceOf",
    "StorageAt",
    "CodeAt",
    "EmbeddedBackend",
    "MockBackend",
    "MockScript",
]
