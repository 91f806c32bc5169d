"""Embedded-EVM chain backend.

Each instance owns a private world state and block context.  Snapshot
tokens are single-use by design: reverting to one invalidates it and every
later token, which prevents accidental state aliasing between the
functional and exploit phases.
"""

from __future__ import annotations

import itertools
import time

from patchlab.chain.base import (
    DEFAULT_GAS_LIMIT,
    Actor,
    Backend,
    BalanceOf,
    BlockContext,
    BlockContextDelta,
    Chain,
    CodeAt,
    Query,
    StorageAt,
    TxResult,
)
from patchlab.chain.evm import apply_transaction
from patchlab.chain.forks import Fork, schedule_for
from patchlab.chain.keccak import keccak256
from patchlab.chain.state import State
from patchlab.errors import DuplicateActor, UnknownSnapshot

# Tokens are unique across every chain instance in the process, so a token
# minted by one chain is never mistaken for another chain's.
_SNAPSHOT_TOKENS = itertools.count()


def artifacts_for_runtime(runtime_bytecode: bytes, name: str = "raw",
                          version: str = "n/a"):
    """CompiledArtifacts for a bare runtime image (bytecode-kind patches)."""
    from patchlab.compiler import CompiledArtifacts

    return CompiledArtifacts(
        contract_name=name,
        abi=(),
        creation_bytecode=synthesize_init_code(runtime_bytecode),
        runtime_bytecode=runtime_bytecode,
        compiler_version=version,
    )


def synthesize_init_code(runtime_bytecode: bytes) -> bytes:
    """Init code that deploys a fixed runtime payload without a constructor.

    Used for bytecode-kind patches (and bytecode-represented originals),
    where only the runtime image exists.
    """
    length = len(runtime_bytecode)
    push_len = length.to_bytes(2, "big")
    # PUSH2 len PUSH1 offset PUSH1 0 CODECOPY PUSH2 len PUSH1 0 RETURN
    header = (
        b"\x61" + push_len           # PUSH2 length
        + b"\x60\x0e"                # PUSH1 14 (header size)
        + b"\x60\x00"                # PUSH1 0
        + b"\x39"                    # CODECOPY
        + b"\x61" + push_len         # PUSH2 length
        + b"\x60\x00"                # PUSH1 0
        + b"\xf3"                    # RETURN
    )
    assert len(header) == 14
    return header + runtime_bytecode


class EmbeddedChain(Chain):
    def __init__(self, genesis: list[Actor], context: BlockContext, *,
                 fork: Fork = Fork.PETERSBURG, gas_price: int = 0,
                 chain_id: int = 1, coinbase_credit: bool = False,
                 deadline: float | None = None):
        seen = set()
        for actor in genesis:
            if actor.handle in seen:
                raise DuplicateActor(actor.handle)
            seen.add(actor.handle)
        self.fork = fork
        self.schedule = schedule_for(fork)
        self.gas_price = gas_price
        self.chain_id = chain_id
        self.coinbase_credit = coinbase_credit
        self.context = context
        self.state = State()
        self._snapshots: dict[int, tuple] = {}
        self._deadline = deadline
        for actor in genesis:
            if actor.initial_balance:
                self.state.add_balance(actor.address, actor.initial_balance)

    # deadline control (used by the harness to bound exploit wall time)

    def set_deadline(self, seconds: float | None) -> None:
        self._deadline = None if seconds is None else time.monotonic() + seconds

    def _blockhash(self, number: int) -> bytes:
        current = self.context.block_number
        if number >= current or number + 256 < current:
            return b"\x00" * 32
        return keccak256(b"patchlab-blockhash" + number.to_bytes(32, "big"))

    # transactions

    def deploy(self, from_actor: Actor, artifacts, constructor_args: bytes = b"",
               value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> tuple[bytes, TxResult]:
        initcode = artifacts.creation_bytecode + constructor_args
        outcome = apply_transaction(
            self.state, self.context, self.schedule, self.fork,
            sender=from_actor.address, to=None, value=value, data=initcode,
            gas_limit=gas_limit, gas_price=self.gas_price, chain_id=self.chain_id,
            blockhash_fn=self._blockhash, deadline=self._deadline,
            coinbase_credit=self.coinbase_credit)
        self._advance_block()
        return outcome.created_address or b"", outcome.result

    def call(self, from_actor: Actor, to: bytes, calldata: bytes = b"",
             value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> TxResult:
        outcome = apply_transaction(
            self.state, self.context, self.schedule, self.fork,
            sender=from_actor.address, to=to, value=value, data=calldata,
            gas_limit=gas_limit, gas_price=self.gas_price, chain_id=self.chain_id,
            blockhash_fn=self._blockhash, deadline=self._deadline,
            coinbase_credit=self.coinbase_credit)
        self._advance_block()
        return outcome.result

    def call_view(self, from_actor: Actor, to: bytes, calldata: bytes = b"",
                  gas_limit: int = DEFAULT_GAS_LIMIT) -> TxResult:
        """Execute a call and discard every state effect (eth_call style)."""
        token = self.snapshot()
        try:
            return self.call(from_actor, to, calldata, 0, gas_limit)
        finally:
            self.revert_to(token)

    def _advance_block(self) -> None:
        # One transaction per block keeps timestamp semantics simple and
        # reproducible; scenario steps control larger jumps explicitly.
        self.context = self.context.advanced(BlockContextDelta(timestamp=1, block_number=1))

    # block context

    def set_block_context(self, delta: BlockContextDelta) -> None:
        self.context = self.context.advanced(delta)

    # snapshots

    def snapshot(self) -> int:
        token = next(_SNAPSHOT_TOKENS)
        self._snapshots[token] = (self.state.export(), self.context)
        return token

    def revert_to(self, token: int) -> None:
        if token not in self._snapshots:
            raise UnknownSnapshot(f"token {token} unknown or already spent")
        exported, context = self._snapshots.pop(token)
        # Reverting rewinds history: every snapshot taken after this one
        # describes a future that no longer exists.
        for later in [t for t in self._snapshots if t > token]:
            del self._snapshots[later]
        self.state.restore(exported)
        self.context = context

    # inspection

    def inspect(self, query: Query):
        if isinstance(query, BalanceOf):
            return self.state.balance(query.address)
        if isinstance(query, StorageAt):
            return self.state.storage(query.address, query.slot).to_bytes(32, "big")
        if isinstance(query, CodeAt):
            return self.state.code(query.address)
        raise TypeError(f"unknown query {query!r}")


class EmbeddedBackend(Backend):
    """Factory for embedded chains; safe to share across worker threads."""

    def __init__(self, *, chain_id: int = 1, coinbase_credit: bool = False):
        self.chain_id = chain_id
        self.coinbase_credit = coinbase_credit

    def create_instance(self, genesis: list[Actor],
                        context: BlockContext = BlockContext(), **config) -> EmbeddedChain:
        return EmbeddedChain(
            genesis, context,
            fork=config.get("fork", Fork.PETERSBURG),
            gas_price=config.get("gas_price", 0),
            chain_id=config.get("chain_id", self.chain_id),
            coinbase_credit=config.get("coinbase_credit", self.coinbase_credit),
        )
