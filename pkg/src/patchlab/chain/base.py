"""Backend-neutral domain types and the chain interface.

A backend turns a genesis description into an isolated chain instance.
Instances are single-task: no concurrent mutation of one handle, but any
number of instances may run in parallel.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace

from patchlab.chain.keccak import keccak256
from patchlab.errors import NonMonotonicContext

WEI_PER_ETHER = 10 ** 18
DEFAULT_FUNDING = 100 * WEI_PER_ETHER
DEFAULT_GAS_LIMIT = 8_000_000
DEFAULT_ADDRESS_SEED = "patchlab-v1"


def actor_address(handle: str, seed: str = DEFAULT_ADDRESS_SEED) -> bytes:
    """Deterministic 20-byte account id for an actor handle.

    Derived from a fixed seed so exploit transcripts replay identically
    across runs and machines.
    """
    return keccak256(seed.encode() + b"/" + handle.encode())[12:]


@dataclass(frozen=True)
class Actor:
    handle: str
    initial_balance: int = DEFAULT_FUNDING
    address: bytes = b""

    def __post_init__(self):
        if not self.address:
            object.__setattr__(self, "address", actor_address(self.handle))
        if len(self.address) != 20:
            raise ValueError(f"actor address must be 20 bytes, got {len(self.address)}")


@dataclass(frozen=True)
class BlockContext:
    timestamp: int = 1_600_000_000
    block_number: int = 1
    prevrandao_or_difficulty: bytes = b"\x00" * 32
    coinbase: bytes = b"\x00" * 20

    def advanced(self, delta: "BlockContextDelta") -> "BlockContext":
        if delta.timestamp < 0 or delta.block_number < 0:
            raise NonMonotonicContext(
                f"timestamp/block_number may only advance (got {delta.timestamp:+}, {delta.block_number:+})"
            )
        return replace(
            self,
            timestamp=self.timestamp + delta.timestamp,
            block_number=self.block_number + delta.block_number,
            prevrandao_or_difficulty=(
                delta.prevrandao_or_difficulty
                if delta.prevrandao_or_difficulty is not None
                else self.prevrandao_or_difficulty
            ),
            coinbase=delta.coinbase if delta.coinbase is not None else self.coinbase,
        )


@dataclass(frozen=True)
class BlockContextDelta:
    """Partial context update: time fields are relative non-negative advances,
    randomness and coinbase are absolute replacements."""

    timestamp: int = 0
    block_number: int = 0
    prevrandao_or_difficulty: bytes | None = None
    coinbase: bytes | None = None


class TxStatus(enum.Enum):
    SUCCESS = "success"
    REVERTED = "reverted"
    OUT_OF_GAS = "out_of_gas"


@dataclass(frozen=True)
class TxResult:
    status: TxStatus
    return_data: bytes = b""
    gas_used: int = 0
    value_transferred: int = 0
    logs: tuple = ()  # (address, topics, data) triples
    halt_reason: str = ""  # diagnostic for non-REVERT exceptional halts

    @property
    def ok(self) -> bool:
        return self.status is TxStatus.SUCCESS

    @property
    def revert_reason(self) -> bytes:
        return self.return_data if self.status is TxStatus.REVERTED else b""


# Read-only inspection queries.


@dataclass(frozen=True)
class BalanceOf:
    address: bytes


@dataclass(frozen=True)
class StorageAt:
    address: bytes
    slot: int


@dataclass(frozen=True)
class CodeAt:
    address: bytes


Query = BalanceOf | StorageAt | CodeAt


class Chain(ABC):
    """One isolated chain instance."""

    @abstractmethod
    def deploy(self, from_actor: Actor, artifacts, constructor_args: bytes = b"",
               value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> tuple[bytes, TxResult]:
        ...

    @abstractmethod
    def call(self, from_actor: Actor, to: bytes, calldata: bytes = b"",
             value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> TxResult:
        ...

    @abstractmethod
    def set_block_context(self, delta: BlockContextDelta) -> None:
        ...

    @abstractmethod
    def snapshot(self) -> int:
        ...

    @abstractmethod
    def revert_to(self, token: int) -> None:
        ...

    @abstractmethod
    def inspect(self, query: Query):
        ...

    # Sugar shared by both backends.

    def balance_of(self, address: bytes) -> int:
        return self.inspect(BalanceOf(address))

    def storage_at(self, address: bytes, slot: int) -> bytes:
        return self.inspect(StorageAt(address, slot))

    def code_at(self, address: bytes) -> bytes:
        return self.inspect(CodeAt(address))


class Backend(ABC):
    """Factory for isolated chain instances."""

    @abstractmethod
    def create_instance(self, genesis: list[Actor],
                        context: BlockContext = BlockContext(), **config) -> Chain:
        ...
