"""Two-phase patch validation: Functional Check, then Exploit Check.

Stage precedence for a patch verdict is fixed:

    compile failure > no difference > broken functionality > exploit verdict

so a non-patch can never be credited as a mitigation.  Functional checks
and the exploit never share a chain instance; liveness assertions replay a
named functional check before and after the attack behind snapshots.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

from patchlab import abi
from patchlab.chain.backend import artifacts_for_runtime
from patchlab.chain.base import Actor, BlockContextDelta, Chain, TxResult
from patchlab.chain.evm import DeadlineExceeded
from patchlab.chain.forks import Fork, fork_for_compiler
from patchlab.compiler import CompiledArtifacts, CompileOptions, Compiler
from patchlab.consistency import Compiled
from patchlab.corpus import ContractCase
from patchlab.diffing import bytecode_differs, source_differs
from patchlab.errors import (
    CompileError,
    InfraFailure,
    NoPragma,
    PatchLabError,
    SchemaError,
    ToolchainMissing,
    Unsatisfiable,
)
from patchlab.patches import PatchCandidate, PatchKind
from patchlab.pragma import parse_pragma, select_compiler
from patchlab.scenario import (
    Assertion,
    AuxSource,
    BalanceAtMost,
    BalanceGain,
    Call,
    CallReturns,
    Deploy,
    ExploitScenario,
    FunctionalCheck,
    LivenessViolated,
    Repeat,
    SetBlockContext,
    StorageEquals,
    Step,
    Transfer,
)


class OutcomeKind(enum.Enum):
    COMPILE_FAIL = "compile_fail"
    NO_DIFF = "no_diff"
    FUNCTIONAL_BROKEN = "functional_broken"
    NOT_MITIGATED = "not_mitigated"
    MITIGATED = "mitigated"
    INFRA_ERROR = "infra_error"
    TIMEOUT = "timeout"
    NO_PATCH = "no_patch"  # matrix-level placeholder, never an evaluation result


@dataclass(frozen=True)
class EvaluationOutcome:
    kind: OutcomeKind
    detail: str = ""


class ScenarioTimeout(Exception):
    pass


@dataclass
class BuildContext:
    """Everything evaluate_patch needs besides the scenario: toolchain,
    options, fork policy."""

    compiler: Compiler
    options: CompileOptions = CompileOptions()
    fork_overrides: dict = field(default_factory=dict)
    strip_metadata: bool = True
    default_timeout: float = 60.0

    def fork_for(self, case_id: str, compiler_version: str,
                 scenario: ExploitScenario | None = None) -> Fork:
        if case_id in self.fork_overrides:
            return Fork(self.fork_overrides[case_id])
        if scenario is not None and scenario.fork:
            return Fork(scenario.fork)
        if compiler_version == "n/a":
            # bytecode-only cases come from the legacy-repair era
            return Fork.PETERSBURG
        return fork_for_compiler(compiler_version)

    def compile_case(self, case: ContractCase) -> tuple[CompiledArtifacts, str]:
        """Compile an original contract; returns (artifacts, version)."""
        if case.source is None:
            return artifacts_for_runtime(case.runtime_bytecode, case.id), "n/a"
        version = select_compiler(parse_pragma(case.source),
                                  self.compiler.available_versions())
        artifacts = self.compiler.compile(case.source, version,
                                          self.options, f"{case.id}.sol")
        return _pick_contract(artifacts, None, case.id), version

    def compile_aux(self, aux: AuxSource, version: str) -> CompiledArtifacts:
        # auxiliary contracts compile with the target's version by default;
        # for bytecode-only cases they select from their own pragma
        if version == "n/a":
            version = select_compiler(parse_pragma(aux.source),
                                      self.compiler.available_versions())
        artifacts = self.compiler.compile(aux.source, version,
                                          self.options, f"{aux.name}.sol")
        return _pick_contract(artifacts, aux.contract, aux.name)


def _pick_contract(artifacts: list[CompiledArtifacts], name: str | None,
                   label: str) -> CompiledArtifacts:
    if name is not None:
        for artifact in artifacts:
            if artifact.contract_name == name:
                return artifact
        raise InfraFailure(f"{label}: no contract named {name!r} in compiled unit")
    if len(artifacts) == 1:
        return artifacts[0]
    raise InfraFailure(
        f"{label}: {len(artifacts)} deployable contracts; set contract_name")


@dataclass
class PatchBuild:
    """Stages 1-2 of the pipeline: compilation and differential analysis."""

    compiled: Compiled
    differs: bool
    pragma_used: str
    artifacts: CompiledArtifacts | None = None
    compile_diagnostics: list = field(default_factory=list)


def prepare_patch(case: ContractCase, patch: PatchCandidate,
                  build: BuildContext,
                  original: CompiledArtifacts | None = None) -> PatchBuild:
    """Compile (source patches only) and diff a patch against its original."""
    if patch.kind is PatchKind.BYTECODE:
        if case.runtime_bytecode is not None:
            original_code = case.runtime_bytecode
        elif original is not None:
            original_code = original.runtime_bytecode
        else:
            raise InfraFailure(f"{patch.key}: bytecode patch needs original bytecode")
        differs = bytecode_differs(original_code, patch.runtime_bytecode,
                                   strip=build.strip_metadata)
        return PatchBuild(Compiled.NOT_APPLICABLE, differs, "n/a",
                          artifacts_for_runtime(patch.runtime_bytecode, case.id))

    if case.source is None:
        raise InfraFailure(f"{patch.key}: source patch for a bytecode-only case")
    differs = source_differs(case.source, patch.source)
    try:
        constraint = parse_pragma(patch.source)
        pragma_used = "patch"
    except NoPragma:
        constraint = parse_pragma(case.source)
        pragma_used = "original"
    version = select_compiler(constraint, build.compiler.available_versions())
    try:
        artifacts = build.compiler.compile(patch.source, version, build.options,
                                           f"{case.id}.sol")
        chosen = _pick_contract(
            artifacts,
            original.contract_name if original is not None else None,
            f"{patch.key}")
    except CompileError as error:
        return PatchBuild(Compiled.NO, differs, pragma_used,
                          compile_diagnostics=error.diagnostics)
    return PatchBuild(Compiled.YES, differs, pragma_used, chosen)


# ---------------------------------------------------------------------------
# step execution
# ---------------------------------------------------------------------------


@dataclass
class StepFailure:
    step_index: str
    step: Step
    result: TxResult | None
    reason: str


class ScenarioRunner:
    """Executes steps and assertions of one scenario against one chain."""

    def __init__(self, scenario: ExploitScenario, chain: Chain,
                 target_artifacts: CompiledArtifacts,
                 aux_artifacts: dict[str, CompiledArtifacts],
                 deadline: float | None = None):
        self.scenario = scenario
        self.chain = chain
        self.target_artifacts = target_artifacts
        self.aux_artifacts = aux_artifacts
        self.addresses: dict[str, bytes] = {}
        self.deadline = deadline
        if deadline is not None and hasattr(chain, "_deadline"):
            chain._deadline = deadline  # bound runaway single transactions too

    # reference resolution

    def _aux_key(self, which: str) -> str:
        if which.startswith("attacker:"):
            index = int(which.split(":", 1)[1])
            return self.scenario.attacker_sources[index].name
        return which

    def resolve_address(self, ref: str, path: str = "ref") -> bytes:
        if ref.startswith("0x"):
            return bytes.fromhex(ref[2:])
        name = ref[1:] if ref.startswith("@") else ref
        if name == "target":
            if "target" not in self.addresses:
                raise InfraFailure(f"{path}: target not deployed yet")
            return self.addresses["target"]
        if name.startswith("attacker:") or name in self.aux_artifacts:
            key = self._aux_key(name)
            if key not in self.addresses:
                raise InfraFailure(f"{path}: auxiliary {key!r} not deployed yet")
            return self.addresses[key]
        for actor in self.scenario.actors:
            if actor.handle == name:
                return actor.address
        raise InfraFailure(f"{path}: unresolvable reference {ref!r}")

    def _resolve_args(self, args: tuple) -> list:
        resolved = []
        for value in args:
            if isinstance(value, str) and value.startswith("@"):
                resolved.append(self.resolve_address(value))
            else:
                resolved.append(value)
        return resolved

    def _check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise ScenarioTimeout

    # step execution

    def run_steps(self, steps: tuple, label: str) -> StepFailure | None:
        for index, step in enumerate(steps):
            failure = self._run_step(step, f"{label}[{index}]")
            if failure is not None:
                return failure
        return None

    def _run_step(self, step: Step, path: str) -> StepFailure | None:
        self._check_deadline()
        try:
            if isinstance(step, Deploy):
                return self._do_deploy(step, path)
            if isinstance(step, Call):
                return self._do_call(step, path)
            if isinstance(step, Transfer):
                actor = self.scenario.actor(step.who)
                result = self.chain.call(actor, self.resolve_address(step.to, path),
                                         value=step.value)
                if not result.ok:
                    return StepFailure(path, step, result, "transfer failed")
                return None
            if isinstance(step, SetBlockContext):
                self.chain.set_block_context(BlockContextDelta(
                    timestamp=step.timestamp, block_number=step.block_number,
                    prevrandao_or_difficulty=step.prevrandao_or_difficulty,
                    coinbase=step.coinbase))
                return None
            if isinstance(step, Repeat):
                for iteration in range(step.count):
                    self._check_deadline()
                    failure = self.run_steps(step.steps, f"{path}.iter{iteration}")
                    if failure is not None:
                        return failure
                return None
        except DeadlineExceeded as exc:
            raise ScenarioTimeout from exc
        raise InfraFailure(f"{path}: unknown step type {type(step).__name__}")

    def _do_deploy(self, step: Deploy, path: str) -> StepFailure | None:
        actor = self.scenario.actor(step.who)
        if step.which == "target":
            artifacts = self.target_artifacts
            key = "target"
        else:
            key = self._aux_key(step.which)
            artifacts = self.aux_artifacts[key]
        args = b""
        if step.args:
            constructor = next((e for e in artifacts.abi
                                if e.get("type") == "constructor"), None)
            if constructor is None:
                raise InfraFailure(f"{path}: constructor args but no constructor ABI")
            types = [arg["type"] for arg in constructor.get("inputs", [])]
            args = abi.encode_sequence(types, self._resolve_args(step.args))
        kwargs = {"gas_limit": step.gas} if step.gas else {}
        address, result = self.chain.deploy(actor, artifacts, args,
                                            value=step.value, **kwargs)
        if not result.ok:
            return StepFailure(path, step, result, "deployment failed")
        self.addresses[key] = address
        return None

    def _do_call(self, step: Call, path: str) -> StepFailure | None:
        actor = self.scenario.actor(step.who)
        target = self.resolve_address(step.target, path)
        if step.calldata is not None:
            calldata = step.calldata
        else:
            calldata = abi.encode_call(step.function, self._resolve_args(step.args))
        kwargs = {"gas_limit": step.gas} if step.gas else {}
        result = self.chain.call(actor, target, calldata, value=step.value, **kwargs)
        if step.expect == "success" and not result.ok:
            return StepFailure(path, step, result, "expected success")
        if step.expect == "revert" and result.ok:
            return StepFailure(path, step, result, "expected failure")
        return None

    # assertions

    def assertion_holds(self, assertion: Assertion) -> bool:
        if isinstance(assertion, BalanceGain):
            actor = self.scenario.actor(assertion.actor)
            gain = self.chain.balance_of(actor.address) - actor.initial_balance
            return gain >= assertion.at_least
        if isinstance(assertion, BalanceAtMost):
            address = self.resolve_address(assertion.address, "balance_at_most")
            return self.chain.balance_of(address) <= assertion.amount
        if isinstance(assertion, StorageEquals):
            address = self.resolve_address(assertion.address, "storage_equals")
            actual = self.chain.storage_at(address, assertion.slot)
            return actual == self._storage_word(assertion.value)
        if isinstance(assertion, CallReturns):
            return self._call_returns_holds(assertion)
        raise InfraFailure(f"assertion {assertion!r} not evaluable here")

    def _artifacts_at(self, address: bytes) -> CompiledArtifacts | None:
        if self.addresses.get("target") == address:
            return self.target_artifacts
        for key, deployed in self.addresses.items():
            if deployed == address and key in self.aux_artifacts:
                return self.aux_artifacts[key]
        return None

    def _storage_word(self, value) -> bytes:
        if isinstance(value, int):
            return value.to_bytes(32, "big")
        if isinstance(value, str) and value.startswith("@"):
            return self.resolve_address(value).rjust(32, b"\x00")
        if isinstance(value, str) and value.startswith("0x"):
            return bytes.fromhex(value[2:]).rjust(32, b"\x00")
        raise InfraFailure(f"storage_equals value {value!r} not encodable")

    def _call_returns_holds(self, assertion: CallReturns) -> bool:
        target = self.resolve_address(assertion.target, "call_returns")
        calldata = abi.encode_call(assertion.function,
                                   self._resolve_args(assertion.args))
        caller = self.scenario.actors[0]
        token = self.chain.snapshot()
        try:
            result = self.chain.call(caller, target, calldata)
        finally:
            self.chain.revert_to(token)
        if not result.ok:
            return False
        if isinstance(assertion.expected, str):
            return result.return_data == bytes.fromhex(assertion.expected[2:])
        artifacts = self._artifacts_at(target)
        function_name = assertion.function.split("(", 1)[0]
        entry = artifacts.find_function(function_name) if artifacts else None
        if entry is None:
            raise InfraFailure(
                f"call_returns({assertion.function}): typed expectation needs the "
                "target ABI; use a 0x literal instead")
        types = [out["type"] for out in entry.get("outputs", [])]
        expected = abi.encode_sequence(types, self._resolve_args(assertion.expected))
        return result.return_data == expected


# ---------------------------------------------------------------------------
# phase runners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionalResult:
    passed: bool
    check: str = ""
    step: str = ""
    detail: str = ""


@dataclass(frozen=True)
class ExploitResult:
    succeeded: bool
    detail: str = ""


def _fresh_runner(scenario: ExploitScenario, backend, fork: Fork,
                  target_artifacts: CompiledArtifacts,
                  aux_artifacts: dict[str, CompiledArtifacts],
                  deadline: float | None) -> ScenarioRunner:
    chain = backend.create_instance(list(scenario.actors), scenario.block_context,
                                    fork=fork)
    return ScenarioRunner(scenario, chain, target_artifacts, aux_artifacts, deadline)


def run_functional_checks(scenario: ExploitScenario,
                          patched_artifacts: CompiledArtifacts,
                          backend, *, fork: Fork = Fork.PETERSBURG,
                          aux_artifacts: dict[str, CompiledArtifacts] | None = None,
                          deadline: float | None = None) -> FunctionalResult:
    """Each check runs on a fresh chain: scenario setup, then check steps;
    the first step that misses its expectation fails the patch."""
    if not scenario.functional_checks:
        raise InfraFailure("scenario reached execution with no functional checks")
    for check in scenario.functional_checks:
        runner = _fresh_runner(scenario, backend, fork, patched_artifacts,
                               aux_artifacts or {}, deadline)
        failure = runner.run_steps(scenario.setup, "setup")
        if failure is not None:
            return FunctionalResult(False, check.name, failure.step_index,
                                    f"setup: {failure.reason}")
        failure = runner.run_steps(check.steps, check.name)
        if failure is not None:
            return FunctionalResult(False, check.name, failure.step_index,
                                    failure.reason)
    return FunctionalResult(True)


def _run_check_passes(runner: ScenarioRunner, check: FunctionalCheck) -> bool:
    """Run a functional check behind a snapshot; True iff it passed."""
    token = runner.chain.snapshot()
    try:
        return runner.run_steps(check.steps, f"liveness:{check.name}") is None
    finally:
        runner.chain.revert_to(token)


def run_exploit(scenario: ExploitScenario, patched_artifacts: CompiledArtifacts,
                backend, *, fork: Fork = Fork.PETERSBURG,
                aux_artifacts: dict[str, CompiledArtifacts] | None = None,
                timeout: float | None = None) -> ExploitResult:
    """Replay the attack on a fresh chain (never shared with the functional
    phase) and evaluate every assertion.

    A setup step that misses its expectation defeats the exploit: the
    attack's preconditions are unattainable on this contract.  Functional
    checks are responsible for flagging that breakage as such.
    """
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        runner = _fresh_runner(scenario, backend, fork, patched_artifacts,
                               aux_artifacts or {}, deadline)
        failure = runner.run_steps(scenario.setup, "setup")
        if failure is not None:
            return ExploitResult(False, f"setup unattainable at {failure.step_index}")

        liveness_pre: dict[str, bool] = {}
        for assertion in scenario.assertions:
            if isinstance(assertion, LivenessViolated):
                check = scenario.functional_check(assertion.check)
                liveness_pre[assertion.check] = _run_check_passes(runner, check)

        failure = runner.run_steps(scenario.attack, "attack")
        if failure is not None:
            return ExploitResult(False,
                                 f"attack step {failure.step_index}: {failure.reason}")

        for assertion in scenario.assertions:
            if isinstance(assertion, LivenessViolated):
                check = scenario.functional_check(assertion.check)
                violated = liveness_pre[assertion.check] and \
                    not _run_check_passes(runner, check)
                if not violated:
                    return ExploitResult(False, f"unmet {assertion.describe()}")
            elif not runner.assertion_holds(assertion):
                return ExploitResult(False, f"unmet {assertion.describe()}")
        return ExploitResult(True)
    except ScenarioTimeout:
        raise
    except DeadlineExceeded as exc:
        raise ScenarioTimeout from exc


@dataclass(frozen=True)
class CheckValidation:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    contract_id: str
    checks: tuple
    exploit_succeeded: bool
    exploit_detail: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return (not self.error and self.exploit_succeeded
                and all(check.passed for check in self.checks))


def validate_scenario(scenario: ExploitScenario, original_case: ContractCase,
                      backend, build: BuildContext) -> ValidationReport:
    """A scenario is usable only if, on the ORIGINAL contract, every
    functional check passes and the exploit succeeds."""
    try:
        artifacts, version = build.compile_case(original_case)
        fork = build.fork_for(original_case.id, version, scenario)
        aux = {a.name: build.compile_aux(a, version)
               for a in scenario.attacker_sources}
        timeout = scenario.timeout or build.default_timeout

        checks = []
        for check in scenario.functional_checks:
            runner = _fresh_runner(scenario, backend, fork, artifacts, aux,
                                   time.monotonic() + timeout)
            failure = runner.run_steps(scenario.setup, "setup")
            if failure is None:
                failure = runner.run_steps(check.steps, check.name)
            checks.append(CheckValidation(
                check.name, failure is None,
                "" if failure is None else f"{failure.step_index}: {failure.reason}"))

        exploit = run_exploit(scenario, artifacts, backend, fork=fork,
                              aux_artifacts=aux, timeout=timeout)
        return ValidationReport(scenario.contract_id, tuple(checks),
                                exploit.succeeded, exploit.detail)
    except ScenarioTimeout:
        return ValidationReport(scenario.contract_id, (), False, "", error="timeout")
    except (PatchLabError, SchemaError) as error:
        return ValidationReport(scenario.contract_id, (), False, "",
                                error=str(error))


def evaluate_patch(case: ContractCase, patch: PatchCandidate,
                   scenario: ExploitScenario, backend,
                   build: BuildContext) -> tuple[EvaluationOutcome, PatchBuild | None]:
    """Full staged pipeline for one (patch, scenario) pair.

    Returns the outcome plus the static build record (None only when the
    failure happened before the patch could even be prepared).
    """
    timeout = scenario.timeout or build.default_timeout
    patch_build = None
    try:
        original, version = build.compile_case(case)
        patch_build = prepare_patch(case, patch, build, original)

        if patch_build.compiled is Compiled.NO:
            return (EvaluationOutcome(
                OutcomeKind.COMPILE_FAIL,
                "; ".join(d.strip().splitlines()[0] if d.strip() else ""
                          for d in patch_build.compile_diagnostics[:2])),
                patch_build)
        if not patch_build.differs:
            return EvaluationOutcome(OutcomeKind.NO_DIFF), patch_build

        fork = build.fork_for(case.id, version, scenario)
        aux = {a.name: build.compile_aux(a, version)
               for a in scenario.attacker_sources}

        deadline = time.monotonic() + timeout
        functional = run_functional_checks(
            scenario, patch_build.artifacts, backend, fork=fork,
            aux_artifacts=aux, deadline=deadline)
        if not functional.passed:
            return (EvaluationOutcome(
                OutcomeKind.FUNCTIONAL_BROKEN,
                f"{functional.check} at {functional.step}: {functional.detail}"),
                patch_build)

        exploit = run_exploit(scenario, patch_build.artifacts, backend,
                              fork=fork, aux_artifacts=aux, timeout=timeout)
        if exploit.succeeded:
            witness = "; ".join(a.describe() for a in scenario.assertions)
            return (EvaluationOutcome(OutcomeKind.NOT_MITIGATED,
                                      f"exploit succeeded; held: {witness}"),
                    patch_build)
        return EvaluationOutcome(OutcomeKind.MITIGATED, exploit.detail), patch_build
    except ScenarioTimeout:
        return EvaluationOutcome(OutcomeKind.TIMEOUT,
                                 f"exceeded {timeout:.0f}s"), patch_build
    except (Unsatisfiable, ToolchainMissing, InfraFailure, NoPragma) as error:
        return EvaluationOutcome(OutcomeKind.INFRA_ERROR, str(error)), patch_build
    except CompileError as error:
        # original or auxiliary sources failed to build: infrastructure, not verdict
        return EvaluationOutcome(OutcomeKind.INFRA_ERROR,
                                 error.diagnostics[0] if error.diagnostics else ""), patch_build
