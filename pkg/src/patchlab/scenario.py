"""Declarative exploit scenarios.

One YAML document per contract (`schema_version: 1`) declares actors,
auxiliary attacker contracts, a setup/attack transaction sequence, the
safety/liveness assertions that witness a successful attack, and benign
functional checks that must keep passing on any acceptable patch.

Reference syntax used throughout steps and assertions:

* `@<handle>`      an actor's address
* `@target`        the contract under evaluation
* `@attacker:<i>`  the i-th auxiliary contract (also addressable by name)
* `0x...`          a literal address / byte string

Amounts are wei integers or strings like `5 ether`, `0.5 ether`,
`10 gwei`, `123 wei`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import yaml

from patchlab.chain.base import DEFAULT_FUNDING, Actor, BlockContext
from patchlab.errors import DanglingActor, SchemaError

DEFAULT_TIMEOUT_SECONDS = 60.0

_UNIT_WEI = {"wei": 1, "gwei": 10 ** 9, "finney": 10 ** 15, "ether": 10 ** 18}


def parse_wei(value, path: str = "value") -> int:
    if isinstance(value, bool):
        raise SchemaError(path, "amount must be a number or unit string")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        parts = value.strip().split()
        try:
            if len(parts) == 1:
                return int(parts[0], 0)
            if len(parts) == 2 and parts[1] in _UNIT_WEI:
                amount = Decimal(parts[0]) * _UNIT_WEI[parts[1]]
                if amount != amount.to_integral_value():
                    raise SchemaError(path, f"{value!r} is not a whole number of wei")
                return int(amount)
        except (ValueError, ArithmeticError) as exc:
            raise SchemaError(path, f"cannot parse amount {value!r}") from exc
    raise SchemaError(path, f"cannot parse amount {value!r}")


# steps ----------------------------------------------------------------------


@dataclass(frozen=True)
class Deploy:
    who: str
    which: str                 # "target" or "attacker:<i>" / aux name
    args: tuple = ()
    value: int = 0
    gas: int | None = None


@dataclass(frozen=True)
class Call:
    who: str
    target: str
    function: str | None = None   # canonical signature; None with raw calldata
    args: tuple = ()
    value: int = 0
    expect: str = "success"       # success | revert | any
    calldata: bytes | None = None  # raw-calldata escape hatch
    gas: int | None = None


@dataclass(frozen=True)
class Transfer:
    who: str
    to: str
    value: int


@dataclass(frozen=True)
class SetBlockContext:
    timestamp: int = 0
    block_number: int = 0
    prevrandao_or_difficulty: bytes | None = None
    coinbase: bytes | None = None


@dataclass(frozen=True)
class Repeat:
    count: int
    steps: tuple


Step = Deploy | Call | Transfer | SetBlockContext | Repeat


# assertions -----------------------------------------------------------------


@dataclass(frozen=True)
class BalanceGain:
    actor: str
    at_least: int
    kind: str = "safety"

    def describe(self) -> str:
        return f"balance_gain({self.actor}, at_least={self.at_least})"


@dataclass(frozen=True)
class BalanceAtMost:
    address: str
    amount: int
    kind: str = "safety"

    def describe(self) -> str:
        return f"balance_at_most({self.address}, {self.amount})"


@dataclass(frozen=True)
class StorageEquals:
    address: str
    slot: int
    value: int | str
    kind: str = "safety"

    def describe(self) -> str:
        return f"storage_equals({self.address}, slot={self.slot})"


@dataclass(frozen=True)
class CallReturns:
    target: str
    function: str
    args: tuple = ()
    expected: tuple | str = ()
    kind: str = "safety"

    def describe(self) -> str:
        return f"call_returns({self.target}, {self.function})"


@dataclass(frozen=True)
class LivenessViolated:
    check: str
    kind: str = "liveness"

    def describe(self) -> str:
        return f"liveness_violated({self.check})"


Assertion = BalanceGain | BalanceAtMost | StorageEquals | CallReturns | LivenessViolated


@dataclass(frozen=True)
class FunctionalCheck:
    name: str
    description: str
    steps: tuple


@dataclass(frozen=True)
class AuxSource:
    name: str
    source: str
    contract: str | None = None


@dataclass(frozen=True)
class ExploitScenario:
    contract_id: str
    actors: tuple
    attacker_sources: tuple
    setup: tuple
    attack: tuple
    assertions: tuple
    functional_checks: tuple
    timeout: float = DEFAULT_TIMEOUT_SECONDS
    block_context: BlockContext = BlockContext()
    contract_name: str | None = None
    fork: str | None = None

    def actor(self, handle: str) -> Actor:
        for actor in self.actors:
            if actor.handle == handle:
                return actor
        raise DanglingActor(handle)

    def functional_check(self, name: str) -> FunctionalCheck:
        for check in self.functional_checks:
            if check.name == name:
                return check
        raise SchemaError("assertions", f"liveness assertion references unknown check {name!r}")


# loading ----------------------------------------------------------------------


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "required field missing")
    return doc[key]


def _parse_step(doc: dict, path: str, known: "_Refs") -> Step:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise SchemaError(path, "step must be a single-key mapping")
    kind, body = next(iter(doc.items()))
    if not isinstance(body, dict):
        raise SchemaError(f"{path}.{kind}", "step body must be a mapping")

    if kind == "deploy":
        who = _require(body, "who", f"{path}.deploy")
        known.check_actor(who, f"{path}.deploy.who")
        which = _require(body, "which", f"{path}.deploy")
        known.check_deploy_ref(which, f"{path}.deploy.which")
        return Deploy(
            who=who, which=which,
            args=tuple(body.get("args", [])),
            value=parse_wei(body.get("value", 0), f"{path}.deploy.value"),
            gas=body.get("gas"))
    if kind == "call":
        who = _require(body, "who", f"{path}.call")
        known.check_actor(who, f"{path}.call.who")
        function = body.get("function")
        calldata = body.get("calldata")
        if (function is None) == (calldata is None):
            raise SchemaError(f"{path}.call",
                              "exactly one of function / calldata required")
        expect = body.get("expect", "success")
        if expect not in ("success", "revert", "any"):
            raise SchemaError(f"{path}.call.expect", f"unknown expectation {expect!r}")
        return Call(
            who=who, target=_require(body, "target", f"{path}.call"),
            function=function,
            args=tuple(body.get("args", [])),
            value=parse_wei(body.get("value", 0), f"{path}.call.value"),
            expect=expect,
            calldata=bytes.fromhex(calldata[2:]) if calldata else None,
            gas=body.get("gas"))
    if kind == "transfer":
        who = _require(body, "who", f"{path}.transfer")
        known.check_actor(who, f"{path}.transfer.who")
        return Transfer(
            who=who, to=_require(body, "to", f"{path}.transfer"),
            value=parse_wei(_require(body, "value", f"{path}.transfer"),
                            f"{path}.transfer.value"))
    if kind == "set_block_context":
        prevrandao = body.get("prevrandao_or_difficulty")
        coinbase = body.get("coinbase")
        return SetBlockContext(
            timestamp=int(body.get("timestamp", 0)),
            block_number=int(body.get("block_number", 0)),
            prevrandao_or_difficulty=(
                bytes.fromhex(prevrandao[2:]).rjust(32, b"\x00")
                if prevrandao else None),
            coinbase=bytes.fromhex(coinbase[2:]) if coinbase else None)
    if kind == "repeat":
        count = _require(body, "count", f"{path}.repeat")
        if not isinstance(count, int) or count < 1:
            raise SchemaError(f"{path}.repeat.count", "count must be an integer >= 1")
        inner = _require(body, "steps", f"{path}.repeat")
        return Repeat(count=count, steps=tuple(
            _parse_step(s, f"{path}.repeat.steps[{i}]", known)
            for i, s in enumerate(inner)))
    raise SchemaError(path, f"unknown step kind {kind!r}")


def _parse_assertion(doc: dict, path: str, known: "_Refs") -> Assertion:
    if not isinstance(doc, dict):
        raise SchemaError(path, "assertion must be a mapping")
    body = dict(doc)
    kind = body.pop("kind", None)
    if len(body) != 1:
        raise SchemaError(path, "assertion must have exactly one type key")
    name, fields = next(iter(body.items()))
    if not isinstance(fields, dict):
        raise SchemaError(f"{path}.{name}", "assertion body must be a mapping")
    if name == "balance_gain":
        actor = _require(fields, "actor", f"{path}.balance_gain")
        known.check_actor(actor, f"{path}.balance_gain.actor")
        return BalanceGain(actor=actor,
                           at_least=parse_wei(_require(fields, "at_least", path), path),
                           kind=kind or "safety")
    if name == "balance_at_most":
        return BalanceAtMost(address=_require(fields, "address", path),
                             amount=parse_wei(_require(fields, "amount", path), path),
                             kind=kind or "safety")
    if name == "storage_equals":
        return StorageEquals(address=_require(fields, "address", path),
                             slot=int(_require(fields, "slot", path)),
                             value=_require(fields, "value", path),
                             kind=kind or "safety")
    if name == "call_returns":
        expected = _require(fields, "expected", path)
        return CallReturns(target=_require(fields, "target", path),
                           function=_require(fields, "function", path),
                           args=tuple(fields.get("args", [])),
                           expected=tuple(expected) if isinstance(expected, list) else expected,
                           kind=kind or "safety")
    if name == "liveness_violated":
        return LivenessViolated(check=_require(fields, "check", path))
    raise SchemaError(path, f"unknown assertion {name!r}")


class _Refs:
    def __init__(self, actor_handles: set[str], aux_names: list[str]):
        self.actor_handles = actor_handles
        self.aux_names = aux_names

    def check_actor(self, handle: str, path: str) -> None:
        if handle not in self.actor_handles:
            raise DanglingActor(handle, path)

    def check_deploy_ref(self, which: str, path: str) -> None:
        if which == "target" or which in self.aux_names:
            return
        if which.startswith("attacker:"):
            index = which.split(":", 1)[1]
            if index.isdigit() and int(index) < len(self.aux_names):
                return
        raise SchemaError(path, f"unknown deployable {which!r}")


def load_scenario(document: str | dict | Path, base_dir: Path | None = None) -> ExploitScenario:
    """Parse and validate a scenario document (path, YAML text, or dict)."""
    if isinstance(document, Path):
        base_dir = document.parent
        document = document.read_text()
    if isinstance(document, str):
        document = yaml.safe_load(document)
    if not isinstance(document, dict):
        raise SchemaError("$", "scenario must be a mapping")
    if document.get("schema_version") != 1:
        raise SchemaError("schema_version", "must be 1")

    contract_id = _require(document, "contract_id", "$")

    actors = []
    for i, entry in enumerate(document.get("actors", [])):
        handle = _require(entry, "handle", f"actors[{i}]")
        balance = parse_wei(entry.get("initial_balance", DEFAULT_FUNDING),
                            f"actors[{i}].initial_balance")
        actors.append(Actor(handle=handle, initial_balance=balance))
    if not actors:
        raise SchemaError("actors", "at least one actor required")
    handles = [a.handle for a in actors]
    if len(set(handles)) != len(handles):
        raise SchemaError("actors", "duplicate actor handles")

    aux = []
    for i, entry in enumerate(document.get("attacker_sources", [])):
        path = f"attacker_sources[{i}]"
        name = entry.get("name", f"aux{i}")
        if "source" in entry:
            source = entry["source"]
        elif "file" in entry:
            if base_dir is None:
                raise SchemaError(f"{path}.file", "file reference needs a base directory")
            source = (base_dir / entry["file"]).read_text()
        else:
            raise SchemaError(path, "needs source or file")
        aux.append(AuxSource(name=name, source=source, contract=entry.get("contract")))

    refs = _Refs(set(handles), [a.name for a in aux])

    setup = tuple(_parse_step(s, f"setup[{i}]", refs)
                  for i, s in enumerate(document.get("setup", [])))
    attack = tuple(_parse_step(s, f"attack[{i}]", refs)
                   for i, s in enumerate(document.get("attack", [])))
    if not attack:
        raise SchemaError("attack", "attack sequence must be non-empty")

    assertions = tuple(_parse_assertion(a, f"assertions[{i}]", refs)
                       for i, a in enumerate(document.get("assertions", [])))
    if not assertions:
        raise SchemaError("assertions", "at least one assertion required")

    checks = []
    for i, entry in enumerate(document.get("functional_checks", [])):
        path = f"functional_checks[{i}]"
        name = _require(entry, "name", path)
        description = entry.get("description", "")
        if not description:
            raise SchemaError(f"{path}.description",
                              "functional checks must describe their coverage")
        steps = tuple(_parse_step(s, f"{path}.steps[{j}]", refs)
                      for j, s in enumerate(_require(entry, "steps", path)))
        if not steps:
            raise SchemaError(f"{path}.steps", "check must have steps")
        for j, step in enumerate(steps):
            if isinstance(step, Call) and step.expect == "any":
                raise SchemaError(f"{path}.steps[{j}]",
                                  "functional-check expectations must be explicit"
                                  " (success or revert)")
        checks.append(FunctionalCheck(name=name, description=description, steps=steps))
    if not checks:
        raise SchemaError("functional_checks", "at least one functional check required")

    for i, assertion in enumerate(assertions):
        if isinstance(assertion, LivenessViolated):
            if assertion.check not in {c.name for c in checks}:
                raise SchemaError(f"assertions[{i}]",
                                  f"references unknown check {assertion.check!r}")

    context_doc = document.get("block_context", {})
    block_context = BlockContext(
        timestamp=int(context_doc.get("timestamp", BlockContext().timestamp)),
        block_number=int(context_doc.get("block_number", BlockContext().block_number)),
        prevrandao_or_difficulty=(
            bytes.fromhex(context_doc["prevrandao_or_difficulty"][2:]).rjust(32, b"\x00")
            if "prevrandao_or_difficulty" in context_doc
            else BlockContext().prevrandao_or_difficulty),
        coinbase=(bytes.fromhex(context_doc["coinbase"][2:])
                  if "coinbase" in context_doc else BlockContext().coinbase),
    )

    return ExploitScenario(
        contract_id=contract_id,
        actors=tuple(actors),
        attacker_sources=tuple(aux),
        setup=setup,
        attack=attack,
        assertions=assertions,
        functional_checks=tuple(checks),
        timeout=float(document.get("timeout", DEFAULT_TIMEOUT_SECONDS)),
        block_context=block_context,
        contract_name=document.get("contract_name"),
        fork=document.get("fork"),
    )


def load_scenarios_dir(directory: str | Path) -> dict[str, ExploitScenario]:
    """All scenarios in a directory, keyed by contract id."""
    directory = Path(directory)
    scenarios: dict[str, ExploitScenario] = {}
    for path in sorted(directory.glob("*.yaml")) + sorted(directory.glob("*.yml")):
        scenario = load_scenario(path)
        if scenario.contract_id in scenarios:
            raise SchemaError(str(path), f"duplicate scenario for {scenario.contract_id}")
        scenarios[scenario.contract_id] = scenario
    return scenarios
