"""Solidity compiler orchestration.

Compilers are resolved from a local version cache laid out as

    <cache>/<exact-version>/solc/      the solc-js toolchain directory
    <cache>/<exact-version>/checksum   sha256 of its soljson.js

and invoked as an external `node` process speaking standard-JSON (see
data/solc_driver.js).  Missing versions can be fetched from the solc-js
release registry (npm) when network use is explicitly allowed; downloads
hold an advisory lock so concurrent runs seed the cache once.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import shutil
import subprocess
import tarfile
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from patchlab.errors import CompileError, InfraFailure, ToolchainMissing

_DRIVER = Path(__file__).parent / "data" / "solc_driver.js"
COMPILE_TIMEOUT_SECONDS = 180


@dataclass(frozen=True)
class CompileOptions:
    optimizer: bool = False  # off by default: deterministic, debuggable bytecode
    optimizer_runs: int = 200
    evm_version: str | None = None

    def as_settings(self) -> dict:
        settings = {
            "optimizer": {"enabled": self.optimizer, "runs": self.optimizer_runs},
            "outputSelection": {
                "*": {"*": ["abi", "evm.bytecode.object", "evm.deployedBytecode.object"]}
            },
        }
        if self.evm_version:
            settings["evmVersion"] = self.evm_version
        return settings


@dataclass(frozen=True)
class CompiledArtifacts:
    contract_name: str
    abi: tuple
    creation_bytecode: bytes
    runtime_bytecode: bytes
    compiler_version: str

    def find_function(self, name: str) -> dict | None:
        for entry in self.abi:
            if entry.get("type") == "function" and entry.get("name") == name:
                return entry
        return None


class SolcCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def toolchain_dir(self, version: str) -> Path:
        return self.root / version / "solc"

    def checksum_file(self, version: str) -> Path:
        return self.root / version / "checksum"

    def available_versions(self) -> list[str]:
        if not self.root.is_dir():
            return []
        found = []
        for entry in sorted(self.root.iterdir()):
            if (entry / "solc" / "soljson.js").is_file():
                found.append(entry.name)
        return found

    def ensure(self, version: str, allow_network: bool = False) -> Path:
        toolchain = self.toolchain_dir(version)
        soljson = toolchain / "soljson.js"
        if soljson.is_file():
            self._verify_checksum(version, soljson)
            return toolchain
        if not allow_network:
            raise ToolchainMissing(version, "not cached and network use is disabled")
        self._fetch(version)
        self._verify_checksum(version, soljson)
        return toolchain

    def _verify_checksum(self, version: str, soljson: Path) -> None:
        recorded = self.checksum_file(version)
        digest = hashlib.sha256(soljson.read_bytes()).hexdigest()
        if recorded.is_file():
            if recorded.read_text().strip() != digest:
                raise ToolchainMissing(version, "cached soljson.js fails its checksum")
        else:
            recorded.write_text(digest + "\n")

    def _fetch(self, version: str) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        with open(lock_path, "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                if (self.toolchain_dir(version) / "soljson.js").is_file():
                    return  # another process seeded it while we waited
                self._fetch_via_npm(version)
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def _fetch_via_npm(self, version: str) -> None:
        if shutil.which("npm") is None:
            raise ToolchainMissing(version, "npm not available to fetch toolchain")
        with tempfile.TemporaryDirectory() as tmp:
            result = subprocess.run(
                ["npm", "install", "--prefix", tmp, "--no-save", "--omit=dev",
                 "--no-audit", "--no-fund", f"solc@{version}"],
                capture_output=True, text=True, timeout=600)
            if result.returncode != 0:
                raise ToolchainMissing(version, f"npm install failed: {result.stderr.strip()}")
            modules = Path(tmp) / "node_modules"
            package_dir = modules / "solc"
            if not (package_dir / "soljson.js").is_file():
                raise ToolchainMissing(version, "toolchain package lacks soljson.js")
            target = self.toolchain_dir(version)
            target.parent.mkdir(parents=True, exist_ok=True)
            if target.exists():
                shutil.rmtree(target)
            shutil.move(str(package_dir), str(target))
            # Hoist the wrapper's runtime dependencies next to it so node's
            # resolution finds them from <toolchain>/node_modules.
            dep_dir = target / "node_modules"
            dep_dir.mkdir(exist_ok=True)
            for dep in modules.iterdir():
                if dep.name not in (".bin", ".package-lock.json"):
                    shutil.move(str(dep), str(dep_dir / dep.name))


class Compiler:
    """Cache-backed compiler with per-run memoization of identical inputs."""

    def __init__(self, cache: SolcCache, allow_network: bool = False):
        self.cache = cache
        self.allow_network = allow_network
        self._memo: dict[str, list[CompiledArtifacts]] = {}
        self._lock = threading.Lock()

    def available_versions(self) -> list[str]:
        return self.cache.available_versions()

    def compile(self, source: str, version: str,
                options: CompileOptions = CompileOptions(),
                source_name: str = "contract.sol") -> list[CompiledArtifacts]:
        input_doc = {
            "language": "Solidity",
            "sources": {source_name: {"content": source}},
            "settings": options.as_settings(),
        }
        payload = json.dumps(input_doc, sort_keys=True)
        key = hashlib.sha256((version + "\x00" + payload).encode()).hexdigest()
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        artifacts = self._compile_cached_on_disk(key, payload, version)
        with self._lock:
            self._memo[key] = artifacts
        return artifacts

    def _compile_cached_on_disk(self, key: str, payload: str,
                                version: str) -> list[CompiledArtifacts]:
        # Content-addressed artifact cache: identical standard-JSON input
        # always yields identical output, so replaying it is sound and keeps
        # repeat runs off the (slow) toolchain startup path.
        cache_file = self.cache.root / "artifacts" / f"{key}.json"
        if cache_file.is_file():
            try:
                return self._parse_output(cache_file.read_text(), version)
            except (InfraFailure, OSError):
                cache_file.unlink(missing_ok=True)  # corrupt entry: recompile
        output_text = self._run_toolchain(payload, version)
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(output_text)
        return self._parse_output(output_text, version)

    def _run_toolchain(self, payload: str, version: str) -> str:
        toolchain = self.cache.ensure(version, self.allow_network)
        try:
            proc = subprocess.run(
                ["node", str(_DRIVER), str(toolchain)],
                input=payload, capture_output=True, text=True,
                timeout=COMPILE_TIMEOUT_SECONDS)
        except subprocess.TimeoutExpired as exc:
            raise InfraFailure(f"solc {version} timed out after {COMPILE_TIMEOUT_SECONDS}s") from exc
        if proc.returncode != 0:
            raise InfraFailure(
                f"solc driver exited {proc.returncode}: {proc.stderr.strip()}")
        return proc.stdout

    def _parse_output(self, output_text: str, version: str) -> list[CompiledArtifacts]:
        try:
            output = json.loads(output_text)
        except json.JSONDecodeError as exc:
            raise InfraFailure(f"solc {version} produced unparsable output") from exc

        diagnostics = [e.get("formattedMessage") or e.get("message", "")
                       for e in output.get("errors", [])
                       if e.get("severity") == "error"]
        if diagnostics:
            raise CompileError(diagnostics)

        artifacts = []
        for contracts in output.get("contracts", {}).values():
            for name, data in contracts.items():
                runtime_hex = data.get("evm", {}).get("deployedBytecode", {}).get("object", "")
                creation_hex = data.get("evm", {}).get("bytecode", {}).get("object", "")
                if not runtime_hex:
                    continue  # abstract contract or interface
                if "__" in runtime_hex or "__" in creation_hex:
                    raise CompileError(
                        [f"contract {name} has unlinked library references"])
                artifacts.append(CompiledArtifacts(
                    contract_name=name,
                    abi=tuple(data.get("abi", [])),
                    creation_bytecode=bytes.fromhex(creation_hex),
                    runtime_bytecode=bytes.fromhex(runtime_hex),
                    compiler_version=version,
                ))
        if not artifacts:
            raise CompileError(["no deployable contracts in source"])
        return artifacts
