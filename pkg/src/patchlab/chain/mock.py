"""Scripted mock backend for harness-logic tests.

The mock keeps real balances, plain transfers, block context and snapshots,
but answers contract calls from a script instead of executing bytecode.
It must honor the same contracts as the embedded backend for that subset;
the shared conformance suite enforces this.

Script fixture format (YAML, also constructible programmatically):

    deployments:
      - contract: Vault           # artifacts.contract_name this rule matches
        storage: {0: 5}           # optional storage preset at the new address
    calls:
      - to: Vault                 # deployed-contract name or "*"
        selector: "withdraw()"    # canonical signature; omit to match any
        nth: 2                    # optional: only the nth matching call
        when_storage:             # optional: rule fires only in this state
          {address: Vault, slot: 0, equals: 7}
        status: success           # success | revert | out_of_gas
        return: "0x"
        gas_used: 30000
        effects:                  # applied only when status == success
          balance_deltas:
            - {address: Vault, delta: -1000}
            - {address: caller, delta: 1000}
          storage_writes:
            - {address: Vault, slot: 1, value: 0}
    default:
      status: success
      gas_used: 21000

Address references inside effects: a deployed contract name, the literal
`caller`, or a 0x-prefixed hex address.

`nth` counters are chain state: snapshots capture them and reverts restore
them.  Scripts that must react to an attack across snapshot boundaries
should condition on storage (`when_storage`) written by the attack instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

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
    TxStatus,
)
from patchlab.chain.keccak import keccak256
from patchlab.chain.backend import _SNAPSHOT_TOKENS
from patchlab.errors import DuplicateActor, InsufficientFunds, UnknownSnapshot

_STATUS = {
    "success": TxStatus.SUCCESS,
    "revert": TxStatus.REVERTED,
    "out_of_gas": TxStatus.OUT_OF_GAS,
}


@dataclass
class CallRule:
    to: str = "*"
    selector: str | None = None
    nth: int | None = None
    when_storage: tuple | None = None  # (address-ref, slot, equals)
    status: TxStatus = TxStatus.SUCCESS
    return_data: bytes = b""
    gas_used: int = 21000
    balance_deltas: list = field(default_factory=list)   # (address-ref, delta)
    storage_writes: list = field(default_factory=list)   # (address-ref, slot, value)
    logs: list = field(default_factory=list)


@dataclass
class DeployRule:
    contract: str
    storage: dict = field(default_factory=dict)


@dataclass
class MockScript:
    deployments: list[DeployRule] = field(default_factory=list)
    calls: list[CallRule] = field(default_factory=list)
    default_status: TxStatus = TxStatus.SUCCESS
    default_gas: int = 21000

    @classmethod
    def from_file(cls, path: str | Path) -> "MockScript":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "MockScript":
        deployments = [DeployRule(d["contract"], dict(d.get("storage", {})))
                       for d in doc.get("deployments", [])]
        calls = []
        for entry in doc.get("calls", []):
            effects = entry.get("effects", {})
            condition = entry.get("when_storage")
            calls.append(CallRule(
                to=entry.get("to", "*"),
                selector=entry.get("selector"),
                nth=entry.get("nth"),
                when_storage=((condition["address"], int(condition["slot"]),
                               int(condition["equals"])) if condition else None),
                status=_STATUS[entry.get("status", "success")],
                return_data=bytes.fromhex(entry.get("return", "0x")[2:]),
                gas_used=entry.get("gas_used", 21000),
                balance_deltas=[(e["address"], int(e["delta"]))
                                for e in effects.get("balance_deltas", [])],
                storage_writes=[(e["address"], int(e["slot"]), int(e["value"]))
                                for e in effects.get("storage_writes", [])],
            ))
        default = doc.get("default", {})
        return cls(deployments, calls,
                   _STATUS[default.get("status", "success")],
                   default.get("gas_used", 21000))


def _selector(signature: str) -> bytes:
    return keccak256(signature.encode())[:4]


class MockChain(Chain):
    def __init__(self, script: MockScript, genesis: list[Actor],
                 context: BlockContext, gas_price: int = 0):
        seen = set()
        for actor in genesis:
            if actor.handle in seen:
                raise DuplicateActor(actor.handle)
            seen.add(actor.handle)
        self.script = script
        self.context = context
        self.gas_price = gas_price
        self.balances: dict[bytes, int] = {}
        self.storage: dict[bytes, dict[int, int]] = {}
        self.codes: dict[bytes, bytes] = {}
        self.deployed_names: dict[str, bytes] = {}
        self.call_counts: dict[tuple, int] = {}
        self._snapshots: dict[int, tuple] = {}
        self._deploy_seq = 0
        for actor in genesis:
            if actor.initial_balance:
                self.balances[actor.address] = (
                    self.balances.get(actor.address, 0) + actor.initial_balance)

    # helpers

    def _resolve(self, ref: str, caller: bytes) -> bytes:
        if ref == "caller":
            return caller
        if ref.startswith("0x"):
            return bytes.fromhex(ref[2:])
        if ref in self.deployed_names:
            return self.deployed_names[ref]
        raise KeyError(f"mock script address reference {ref!r} not resolvable")

    def _charge(self, sender: bytes, value: int, gas_used: int) -> None:
        cost = value + gas_used * self.gas_price
        if self.balances.get(sender, 0) < cost:
            raise InsufficientFunds(f"mock sender balance below {cost}")

    # transactions

    def deploy(self, from_actor: Actor, artifacts, constructor_args: bytes = b"",
               value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> tuple[bytes, TxResult]:
        gas_used = 53000
        self._charge(from_actor.address, value, gas_used)
        self._deploy_seq += 1
        name = artifacts.contract_name
        address = keccak256(b"mock-deploy" + name.encode()
                            + self._deploy_seq.to_bytes(4, "big"))[12:]
        self.codes[address] = artifacts.runtime_bytecode or b"\xfe"
        self.deployed_names[name] = address
        for rule in self.script.deployments:
            if rule.contract == name:
                self.storage[address] = dict(rule.storage)
        self.balances[from_actor.address] -= value + gas_used * self.gas_price
        self.balances[address] = self.balances.get(address, 0) + value
        self.context = self.context.advanced(BlockContextDelta(timestamp=1, block_number=1))
        return address, TxResult(TxStatus.SUCCESS, gas_used=gas_used,
                                 value_transferred=value)

    def call(self, from_actor: Actor, to: bytes, calldata: bytes = b"",
             value: int = 0, gas_limit: int = DEFAULT_GAS_LIMIT) -> TxResult:
        sender = from_actor.address
        code = self.codes.get(to, b"")
        if not code:
            # plain value transfer
            gas_used = 21000
            self._charge(sender, value, gas_used)
            self.balances[sender] -= value + gas_used * self.gas_price
            self.balances[to] = self.balances.get(to, 0) + value
            self.context = self.context.advanced(BlockContextDelta(timestamp=1, block_number=1))
            return TxResult(TxStatus.SUCCESS, gas_used=gas_used, value_transferred=value)

        rule = self._match(to, calldata)
        gas_used = rule.gas_used if rule else self.script.default_gas
        status = rule.status if rule else self.script.default_status
        self._charge(sender, value if status is TxStatus.SUCCESS else 0, gas_used)
        self.balances[sender] -= gas_used * self.gas_price
        if status is TxStatus.SUCCESS:
            self.balances[sender] -= value
            self.balances[to] = self.balances.get(to, 0) + value
            if rule:
                for ref, delta in rule.balance_deltas:
                    addr = self._resolve(ref, sender)
                    self.balances[addr] = self.balances.get(addr, 0) + delta
                for ref, slot, val in rule.storage_writes:
                    addr = self._resolve(ref, sender)
                    self.storage.setdefault(addr, {})[slot] = val
        self.context = self.context.advanced(BlockContextDelta(timestamp=1, block_number=1))
        return TxResult(status,
                        return_data=rule.return_data if rule else b"",
                        gas_used=gas_used,
                        value_transferred=value if status is TxStatus.SUCCESS else 0)

    def _match(self, to: bytes, calldata: bytes) -> CallRule | None:
        selector = calldata[:4]
        for rule in self.script.calls:
            if rule.to != "*":
                target = self.deployed_names.get(rule.to)
                if target != to:
                    continue
            if rule.selector is not None and _selector(rule.selector) != selector:
                continue
            if rule.when_storage is not None:
                ref, slot, expected = rule.when_storage
                try:
                    address = self._resolve(ref, b"")
                except KeyError:
                    continue
                if self.storage.get(address, {}).get(slot, 0) != expected:
                    continue
            key = (id(rule),)
            count = self.call_counts.get(key, 0) + 1
            if rule.nth is not None and count != rule.nth:
                # count attempts against nth-rules even when they don't fire
                self.call_counts[key] = count
                continue
            self.call_counts[key] = count
            return rule
        return None

    # block context / snapshots / inspection

    def set_block_context(self, delta: BlockContextDelta) -> None:
        self.context = self.context.advanced(delta)

    def snapshot(self) -> int:
        token = next(_SNAPSHOT_TOKENS)
        self._snapshots[token] = (
            dict(self.balances),
            {a: dict(s) for a, s in self.storage.items()},
            dict(self.codes),
            dict(self.deployed_names),
            dict(self.call_counts),
            self.context,
        )
        return token

    def revert_to(self, token: int) -> None:
        if token not in self._snapshots:
            raise UnknownSnapshot(f"token {token} unknown or already spent")
        balances, storage, codes, names, counts, context = self._snapshots.pop(token)
        for later in [t for t in self._snapshots if t > token]:
            del self._snapshots[later]
        self.balances = dict(balances)
        self.storage = {a: dict(s) for a, s in storage.items()}
        self.codes = dict(codes)
        self.deployed_names = dict(names)
        self.call_counts = dict(counts)
        self.context = context

    def inspect(self, query: Query):
        if isinstance(query, BalanceOf):
            return self.balances.get(query.address, 0)
        if isinstance(query, StorageAt):
            return self.storage.get(query.address, {}).get(query.slot, 0).to_bytes(32, "big")
        if isinstance(query, CodeAt):
            return self.codes.get(query.address, b"")
        raise TypeError(f"unknown query {query!r}")

    def call_view(self, from_actor: Actor, to: bytes, calldata: bytes = b"",
                  gas_limit: int = DEFAULT_GAS_LIMIT) -> TxResult:
        token = self.snapshot()
        try:
            return self.call(from_actor, to, calldata, 0, gas_limit)
        finally:
            self.revert_to(token)


class MockBackend(Backend):
    def __init__(self, script: MockScript | None = None):
        self.script = script or MockScript()

    def create_instance(self, genesis: list[Actor],
                        context: BlockContext = BlockContext(), **config) -> MockChain:
        return MockChain(self.script, genesis, context,
                         gas_price=config.get("gas_price", 0))
