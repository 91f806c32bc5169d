"""Command-line interface.

    patchlab validate --config run.yaml
    patchlab evaluate --config run.yaml [--tool T]... [--revalidate] [--workers N]
    patchlab report out/run_report.json [--format machine|table] [--csv matrix.csv]

Exit status separates infrastructure failures from scientific verdicts:
`evaluate` exits non-zero only for infrastructure errors (or stale
validation), never because patches turned out to be bad.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from patchlab.errors import PatchLabError, SchemaError, UnknownTool
from patchlab.pipeline import (
    RunConfig,
    run_evaluation,
    run_validation,
    stamp_is_fresh,
    write_stamp,
)
from patchlab.report import export_matrix_csv, parse_report, render_tables, write_report


def _load_config(args) -> RunConfig:
    overrides = {
        "workers": args.workers,
        "output_path": Path(args.output) if args.output else None,
    }
    if os.environ.get("PATCHLAB_SOLC_CACHE"):
        overrides["compiler_cache_dir"] = Path(os.environ["PATCHLAB_SOLC_CACHE"])
    return RunConfig.from_file(args.config, **overrides)


def cmd_validate(args) -> int:
    config = _load_config(args)
    run = run_validation(config)
    if not run.reports and not run.missing_contracts:
        print("warning: no scenarios found; nothing to validate")
        return 0
    for contract_id in run.missing_contracts:
        print(f"FAIL {contract_id}: MissingContract (no corpus entry)")
    for report in run.reports:
        if report.ok:
            print(f"ok   {report.contract_id}: exploit fires on original, "
                  f"{len(report.checks)} functional check(s) pass")
        else:
            detail = report.error or report.exploit_detail or "functional check failed"
            print(f"FAIL {report.contract_id}: exploit={report.exploit_succeeded} "
                  f"{detail}")
            for check in report.checks:
                if not check.passed:
                    print(f"     check {check.name}: {check.detail}")
    if run.ok:
        write_stamp(config)
        print(f"validation stamp written to {config.stamp_path()}")
        return 0
    return 1


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    if args.revalidate:
        run = run_validation(config)
        if not run.ok:
            print("validation failed; fix scenarios before evaluating", file=sys.stderr)
            return 1
        write_stamp(config)
    elif not stamp_is_fresh(config):
        print("no fresh validation stamp for these inputs; "
              "run `patchlab validate` first or pass --revalidate", file=sys.stderr)
        return 2
    try:
        report = run_evaluation(config, tool_filter=args.tool or None)
    except UnknownTool as error:
        print(f"unknown tool in --tool filter: {error}", file=sys.stderr)
        return 2
    write_report(report, config.output_path)
    print(f"run report written to {config.output_path}")
    infra = [o for o in report["outcomes"] if o["outcome"] == "infra_error"]
    for entry in infra:
        print(f"infra error: {entry['tool']}/{entry['contract']}/{entry['patch']}: "
              f"{entry['detail']}", file=sys.stderr)
    return 1 if infra else 0


def cmd_report(args) -> int:
    try:
        report = parse_report(Path(args.report_file).read_text())
    except (OSError, SchemaError) as error:
        print(f"cannot read report: {error}", file=sys.stderr)
        return 2
    if args.format == "machine":
        from patchlab.report import render_machine
        sys.stdout.write(render_machine(report))
    else:
        sys.stdout.write(render_tables(report))
    if args.csv:
        export_matrix_csv(report, args.csv)
        print(f"outcome matrix exported to {args.csv}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchlab",
        description="Exploit-driven validation of smart contract patches")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate",
                              help="check every scenario against its original contract")
    validate.add_argument("--config", required=True)
    validate.add_argument("--workers", type=int, default=None)
    validate.add_argument("--output", default=None)
    validate.set_defaults(func=cmd_validate)

    evaluate = sub.add_parser("evaluate", help="evaluate all patches")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--tool", action="append",
                          help="restrict to these tools (repeatable)")
    evaluate.add_argument("--revalidate", action="store_true",
                          help="re-run scenario validation before evaluating")
    evaluate.add_argument("--workers", type=int, default=None)
    evaluate.add_argument("--output", default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    report = sub.add_parser("report", help="render a run report")
    report.add_argument("report_file")
    report.add_argument("--format", choices=("machine", "table"), default="table")
    report.add_argument("--csv", default=None,
                        help="also export the outcome matrix as CSV")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PatchLabError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
