"""End-to-end orchestration: wiring corpus, scenarios, patches and reports
into validation and evaluation runs.

Kept separate from the CLI so tests drive runs programmatically.  Results
are collected into sorted structures before aggregation, so the metrics
section is byte-identical regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from patchlab import __version__
from patchlab.chain import EmbeddedBackend
from patchlab.chain.base import DEFAULT_ADDRESS_SEED
from patchlab.compiler import Compiler, CompileOptions, SolcCache
from patchlab.consistency import Compiled, Consistent, StaticVerdict, patch_consistent
from patchlab.corpus import Corpus, load_corpus
from patchlab.detection import detection_matches_ground_truth, parse_detection_report
from patchlab.errors import PatchLabError, SchemaError, UnknownTool
from patchlab.forks_info import fork_defaults_table
from patchlab.harness import (
    BuildContext,
    EvaluationOutcome,
    OutcomeKind,
    PatchBuild,
    evaluate_patch,
    prepare_patch,
    validate_scenario,
)
from patchlab.metrics import OutcomeMatrix, build_metrics
from patchlab.patches import PatchCandidate, load_patches
from patchlab.report import assemble_report
from patchlab.scenario import ExploitScenario, load_scenarios_dir
from patchlab.taxonomy import DEFAULT_CATEGORY_MAP, CategoryMap


@dataclass
class RunConfig:
    corpus_dir: Path
    scenarios_dir: Path
    patches_dir: Path
    reports_dir: Path
    output_path: Path
    workers: int = 1
    compiler_cache_dir: Path = Path(".solc-cache")
    allow_network: bool = False
    default_timeout: float = 60.0
    fork_overrides: dict = field(default_factory=dict)
    category_map_path: Path = DEFAULT_CATEGORY_MAP
    strip_metadata: bool = True
    optimizer: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise SchemaError("workers", "must be >= 1")
        for name in ("corpus_dir", "scenarios_dir", "patches_dir", "reports_dir"):
            directory = getattr(self, name)
            if not Path(directory).is_dir():
                raise SchemaError(name, f"directory {directory} does not exist")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        base = Path(path).parent
        def resolve(key, default=None):
            if key in overrides and overrides[key] is not None:
                return overrides.pop(key)
            value = doc.get(key, default)
            return value
        def resolve_path(key, default=None):
            value = resolve(key, default)
            if value is None:
                raise SchemaError(key, "required path missing")
            value = Path(value)
            return value if value.is_absolute() else base / value
        config = cls(
            corpus_dir=resolve_path("corpus_dir"),
            scenarios_dir=resolve_path("scenarios_dir"),
            patches_dir=resolve_path("patches_dir"),
            reports_dir=resolve_path("reports_dir"),
            output_path=resolve_path("output_path", "out/run_report.json"),
            workers=int(resolve("workers", 1)),
            compiler_cache_dir=resolve_path("compiler_cache_dir", ".solc-cache"),
            allow_network=bool(resolve("allow_network", False)),
            default_timeout=float(resolve("default_timeout", 60.0)),
            fork_overrides=dict(resolve("fork_overrides", {}) or {}),
            strip_metadata=bool(resolve("strip_metadata", True)),
            optimizer=bool(resolve("optimizer", False)),
        )
        return config

    def build_context(self) -> BuildContext:
        compiler = Compiler(SolcCache(self.compiler_cache_dir),
                            allow_network=self.allow_network)
        return BuildContext(
            compiler=compiler,
            options=CompileOptions(optimizer=self.optimizer),
            fork_overrides=dict(self.fork_overrides),
            strip_metadata=self.strip_metadata,
            default_timeout=self.default_timeout,
        )

    def stamp_path(self) -> Path:
        return self.output_path.parent / "validation.stamp.json"


def inputs_digest(config: RunConfig) -> str:
    """Content hash over everything validation depends on."""
    digest = hashlib.sha256()
    for directory in (config.corpus_dir, config.scenarios_dir):
        for path in sorted(Path(directory).rglob("*")):
            if path.is_file():
                digest.update(str(path.relative_to(directory)).encode())
                digest.update(path.read_bytes())
    digest.update(__version__.encode())
    return digest.hexdigest()


# --- validation -------------------------------------------------------------


@dataclass
class ValidationRun:
    reports: list
    missing_contracts: list[str]

    @property
    def ok(self) -> bool:
        return not self.missing_contracts and all(r.ok for r in self.reports)


def run_validation(config: RunConfig) -> ValidationRun:
    corpus = load_corpus(config.corpus_dir)
    scenarios = load_scenarios_dir(config.scenarios_dir)
    build = config.build_context()
    backend = EmbeddedBackend()
    reports = []
    missing = []
    for contract_id, scenario in sorted(scenarios.items()):
        case = corpus.get(contract_id)
        if case is None:
            missing.append(contract_id)
            continue
        reports.append(validate_scenario(scenario, case, backend, build))
    return ValidationRun(reports, missing)


def write_stamp(config: RunConfig) -> None:
    config.stamp_path().parent.mkdir(parents=True, exist_ok=True)
    config.stamp_path().write_text(json.dumps(
        {"digest": inputs_digest(config), "validated": True}, indent=2) + "\n")


def stamp_is_fresh(config: RunConfig) -> bool:
    path = config.stamp_path()
    if not path.is_file():
        return False
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError:
        return False
    return doc.get("validated") is True and doc.get("digest") == inputs_digest(config)


# --- evaluation -------------------------------------------------------------


def _load_detection_reports(config: RunConfig, corpus: Corpus,
                            mapping: CategoryMap) -> dict:
    """{(tool, contract, phase): DetectionReport} where phase is 'before'
    or 'after-<patch_id>'."""
    reports: dict[tuple, object] = {}
    root = Path(config.reports_dir)
    for tool_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for path in sorted(tool_dir.glob("*.json")):
            stem = path.stem  # <contract>.before | <contract>.after-<patch>
            if "." not in stem:
                continue
            contract_id, phase = stem.split(".", 1)
            report = parse_detection_report(path.read_text(), tool_dir.name, mapping)
            reports[(tool_dir.name, contract_id, phase)] = report
    return reports


def _static_verdict(patch: PatchCandidate, patch_build: PatchBuild | None,
                    corpus: Corpus, detections: dict) -> StaticVerdict:
    case = corpus.get(patch.contract_id)
    before = detections.get((patch.tool, patch.contract_id, "before"))
    after = detections.get((patch.tool, patch.contract_id, f"after-{patch.patch_id}"))
    if before is None or after is None or case is None:
        consistent = Consistent.UNKNOWN
    else:
        consistent = (Consistent.YES
                      if patch_consistent(before, after, case.ground_truth)
                      else Consistent.NO)
    if patch_build is None:
        return StaticVerdict(patch.tool, patch.contract_id, patch.patch_id,
                             Compiled.NO, False, consistent, "n/a")
    return StaticVerdict(patch.tool, patch.contract_id, patch.patch_id,
                         patch_build.compiled, patch_build.differs, consistent,
                         patch_build.pragma_used)


def _static_summary(tools: list[str], corpus: Corpus,
                    patches: list[PatchCandidate],
                    verdicts: dict[tuple, StaticVerdict],
                    detections: dict) -> dict[str, dict]:
    summary = {}
    for tool in tools:
        tool_patches = [p for p in patches if p.tool == tool]
        contracts = sorted({p.contract_id for p in tool_patches})
        detected = 0
        for case in corpus:
            report = detections.get((tool, case.id, "before"))
            if report is not None and detection_matches_ground_truth(report, case):
                detected += 1
        def count(predicate):
            patch_hits = sum(1 for p in tool_patches if predicate(verdicts[p.key]))
            contract_hits = sum(
                1 for c in contracts
                if any(predicate(verdicts[p.key]) for p in tool_patches
                       if p.contract_id == c))
            return contract_hits, patch_hits
        compilable_c, compilable_p = count(lambda v: v.compiled is Compiled.YES)
        different_c, different_p = count(lambda v: v.differs)
        consistent_c, consistent_p = count(lambda v: v.consistent is Consistent.YES)
        summary[tool] = {
            "detected": detected,
            "generated_contracts": len(contracts),
            "generated_patches": len(tool_patches),
            "compilable_contracts": compilable_c,
            "compilable_patches": compilable_p,
            "different_contracts": different_c,
            "different_patches": different_p,
            "consistent_contracts": consistent_c,
            "consistent_patches": consistent_p,
        }
    return summary


def run_evaluation(config: RunConfig, tool_filter: list[str] | None = None) -> dict:
    """Execute the full static + dynamic pipeline and assemble the report."""
    corpus = load_corpus(config.corpus_dir)
    scenarios = load_scenarios_dir(config.scenarios_dir)
    mapping = CategoryMap.load(config.category_map_path)
    patches = load_patches(config.patches_dir)
    detections = _load_detection_reports(config, corpus, mapping)

    all_tools = sorted({p.tool for p in patches} | {t for (t, _c, _p) in detections})
    if tool_filter:
        unknown = sorted(set(tool_filter) - set(all_tools))
        if unknown:
            raise UnknownTool(", ".join(unknown))
        tools = sorted(set(tool_filter))
        patches = [p for p in patches if p.tool in tools]
    else:
        tools = all_tools

    build = config.build_context()
    backend = EmbeddedBackend()
    exploits = sorted(cid for cid in scenarios if corpus.get(cid) is not None)

    def work(patch: PatchCandidate):
        case = corpus.get(patch.contract_id)
        if case is None:
            return patch.key, None, EvaluationOutcome(
                OutcomeKind.INFRA_ERROR, "contract missing from corpus")
        scenario = scenarios.get(patch.contract_id)
        if scenario is None:
            # static stages only: no exploit exists for this contract
            try:
                original, _version = build.compile_case(case)
                return patch.key, prepare_patch(case, patch, build, original), None
            except PatchLabError as error:
                return patch.key, None, EvaluationOutcome(
                    OutcomeKind.INFRA_ERROR, str(error))
        outcome, patch_build = evaluate_patch(case, patch, scenario, backend, build)
        return patch.key, patch_build, outcome

    ordered_patches = sorted(patches, key=lambda p: p.key)
    if config.workers == 1:
        results = [work(p) for p in ordered_patches]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, ordered_patches))

    patch_builds: dict[tuple, PatchBuild | None] = {}
    outcomes: dict[tuple, EvaluationOutcome] = {}
    for key, patch_build, outcome in sorted(results, key=lambda r: r[0]):
        patch_builds[key] = patch_build
        if outcome is not None:
            outcomes[key] = outcome

    verdicts = {p.key: _static_verdict(p, patch_builds.get(p.key), corpus, detections)
                for p in ordered_patches}

    exploit_outcomes = {key: outcome for key, outcome in outcomes.items()
                        if key[1] in exploits}
    matrix = OutcomeMatrix.from_outcomes(tools, exploits, exploit_outcomes)
    labels = {cid: corpus.get(cid).ground_truth for cid in exploits}
    summary = _static_summary(tools, corpus, ordered_patches, verdicts, detections)
    metrics = build_metrics(matrix, labels, summary)

    run_config_doc = {
        "fork_defaults": fork_defaults_table(),
        "fork_overrides": {k: str(v) for k, v in sorted(config.fork_overrides.items())},
        "compiler_versions": build.compiler.available_versions(),
        "actor_address_seed": DEFAULT_ADDRESS_SEED,
        "default_timeout": config.default_timeout,
        "strip_metadata": config.strip_metadata,
        "optimizer": config.optimizer,
        "workers": config.workers,
        "tool_filter": sorted(tool_filter) if tool_filter else [],
    }
    corpus_doc = {
        "contracts": len(corpus),
        "exploits": len(exploits),
        "multi_label": corpus.multi_label_ids(),
        "exploitability": {status.value: count for status, count
                           in sorted(corpus.exploitability_counts().items(),
                                     key=lambda kv: kv[0].value)},
    }
    outcome_docs = [
        {"tool": key[0], "contract": key[1], "patch": key[2],
         "outcome": outcome.kind.value, "detail": outcome.detail}
        for key, outcome in sorted(outcomes.items())
    ]
    verdict_docs = [verdicts[p.key].as_dict() for p in ordered_patches]
    return assemble_report(run_config_doc, corpus_doc, verdict_docs,
                           outcome_docs, metrics.as_dict())
