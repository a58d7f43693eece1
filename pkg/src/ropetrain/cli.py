"""Command line entry point: grading, sessions server, experiments, audits.

Exit codes are a stable contract: 0 success, 1 runtime failure, 2 usage
error. Every command runs fully offline with the deterministic matcher and
a mock or cassette backend.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import audit as audit_mod
from . import config as config_mod
from . import grading, lab, mocksim, output_grading
from .bundles import TaskRegistry, builtin_bundle_root
from .errors import MissingFile, RopetrainError, SchemaViolation
from .gateway import BackendConfig, cassette_backend, live_backend


class UsageError(Exception):
    pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RopetrainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ropetrain")
    parser.add_argument("--config", help="path to a rope.toml-style config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tasks = sub.add_parser("tasks", help="list available task bundles")
    add_common(p_tasks)
    p_tasks.set_defaults(func=cmd_tasks)

    p_grade = sub.add_parser("grade", help="grade one prompt against a task")
    add_common(p_grade)
    p_grade.add_argument("prompt_file")
    p_grade.add_argument("--task", required=True, help="task bundle id")
    p_grade.add_argument("--matcher", choices=["deterministic", "judge"], default="deterministic")
    p_grade.add_argument("--output-grade", choices=["auto", "sheet"], default="auto")
    p_grade.add_argument("--sheet", help="grading sheet path (sheet mode)")
    p_grade.add_argument("--ingest-sheet", help="re-score from a filled grading sheet")
    p_grade.add_argument("--format", choices=["json", "csv"], default="json")
    p_grade.add_argument("--out", help="write the report here instead of stdout")
    p_grade.set_defaults(func=cmd_grade)

    p_serve = sub.add_parser("serve", help="run the training session HTTP API")
    add_common(p_serve)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--storage", help="session log directory")
    p_serve.set_defaults(func=cmd_serve)

    p_exp = sub.add_parser("experiment", help="batch-grade a prompt corpus")
    add_common(p_exp)
    p_exp.add_argument("corpus", help="corpus CSV: participant_id, phase, task_id, variant, prompt_path")
    p_exp.add_argument("--backends", help="comma-separated backend specs (default: the --backend)")
    p_exp.add_argument("--optimize", help="optimizer template file, or 'builtin'")
    p_exp.add_argument("--matcher", choices=["deterministic", "judge"], default="deterministic")
    p_exp.add_argument("--out", default="experiment_out", help="report directory")
    p_exp.set_defaults(func=cmd_experiment)

    p_audit = sub.add_parser("audit", help="aggregate feedback-audit annotations over a session log")
    p_audit.add_argument("log", help="session log (JSONL)")
    p_audit.add_argument("annotations", help="annotations CSV")
    p_audit.add_argument("--out", help="write the table here instead of stdout")
    p_audit.set_defaults(func=cmd_audit)

    return parser


def add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bundles", help="task bundle root (default: built-in bundles)")
    parser.add_argument(
        "--backend",
        help="backend spec: mock[:model], cassette:<model>, or live:<model>",
    )
    parser.add_argument("--cassette", help="cassette file for cassette backends")


def make_registry(args) -> TaskRegistry:
    cfg = config_mod.load_config(args.config)
    root = config_mod.resolve(getattr(args, "bundles", None), None, cfg, "bundles")
    return TaskRegistry(Path(root) if root else builtin_bundle_root())


def make_backend(args, spec: str | None = None) -> BackendConfig:
    cfg = config_mod.load_config(args.config)
    spec = spec or config_mod.resolve(getattr(args, "backend", None), None, cfg, "backend", "mock")
    cassette = config_mod.resolve(getattr(args, "cassette", None), None, cfg, "cassette")
    kind, _, model = spec.partition(":")
    if kind == "mock":
        return mocksim.simulated_backend(backend_id=spec, model_name=model or "sim")
    if kind == "cassette":
        if not cassette:
            raise UsageError("cassette backends need --cassette <path>")
        return cassette_backend(cassette, backend_id=spec, model_name=model or "default")
    if kind == "live":
        base_url = config_mod.resolve(None, "ROPE_LLM_BASE_URL", cfg, "base_url")
        model = model or config_mod.resolve(None, None, cfg, "model", "gpt-4o")
        try:
            return live_backend(backend_id=spec, model_name=model, base_url=base_url)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown backend spec {spec!r}")


def make_matcher(args, backend: BackendConfig) -> grading.Matcher:
    if args.matcher == "judge":
        return grading.Matcher(mode="judge", backend=backend)
    return grading.DETERMINISTIC


# --- commands ----------------------------------------------------------------


def cmd_tasks(args) -> int:
    registry = make_registry(args)
    for task_id, kind, title in registry.list():
        print(f"{task_id}\t{kind.value}\t{title}")
    return 0


def cmd_grade(args) -> int:
    registry = make_registry(args)
    try:
        bundle = registry.get(args.task)
    except (MissingFile, SchemaViolation) as exc:
        raise UsageError(f"cannot load task {args.task!r}: {exc}") from exc
    prompt_path = Path(args.prompt_file)
    if not prompt_path.is_file():
        raise UsageError(f"prompt file {prompt_path} not found")
    prompt = prompt_path.read_text(encoding="utf-8")

    backend = make_backend(args)
    matcher = make_matcher(args, backend)
    extracted = grading.extract_requirements(prompt, matcher)
    assessment = grading.classify_defects(extracted, bundle.reference_requirements, matcher)

    if args.ingest_sheet:
        grade = output_grading.ingest_manual_grades(args.ingest_sheet, bundle)
        quality = grade.llm_output_quality
    elif args.output_grade == "sheet":
        sheet_path = args.sheet or f"{bundle.id}_sheet.csv"
        artifact = output_grading.generate_output(prompt, bundle, backend)
        output_grading.grade_output(artifact, bundle, "manual_sheet", sheet_path=sheet_path)
        print(f"grading sheet written to {sheet_path}", file=sys.stderr)
        quality = None
    else:
        artifact = output_grading.generate_output(prompt, bundle, backend)
        grade = output_grading.grade_output(artifact, bundle, "auto_judge", backend=backend)
        quality = grade.llm_output_quality

    report = grading.score_report(assessment, quality)
    payload = {
        "task_id": bundle.id,
        "backend": backend.backend_id,
        "matcher": matcher.mode,
        **report.to_dict(),
        "assessment": assessment.to_dict(),
    }
    if args.format == "json":
        rendered = json.dumps(payload, indent=2) + "\n"
    else:
        rendered = _report_csv(payload)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 0


def _report_csv(payload: dict) -> str:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(
        ["task_id", "backend", "matcher", "requirement_quality", "llm_output_quality",
         "overall", "omission_count", "commission_count"]
    )
    commissions = sum(payload["commission_counts"].values())
    writer.writerow(
        [payload["task_id"], payload["backend"], payload["matcher"],
         payload["requirement_quality"],
         "" if payload["llm_output_quality"] is None else payload["llm_output_quality"],
         "" if payload["overall"] is None else payload["overall"],
         payload["omission_count"], commissions]
    )
    return buffer.getvalue()


def cmd_serve(args) -> int:
    import uvicorn

    from .sessions import SessionManager
    from .server import create_app

    cfg = config_mod.load_config(args.config)
    registry = make_registry(args)
    backend = make_backend(args)
    storage = config_mod.resolve(args.storage, None, cfg, "storage", "sessions")
    port = args.port if args.port is not None else int(config_mod.resolve(None, None, cfg, "port", "8000"))
    manager = SessionManager(registry, backend, storage_root=storage)
    app = create_app(manager)
    try:
        uvicorn.run(app, host=args.host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"error: server failed to start on port {port}: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args) -> int:
    corpus_path = Path(args.corpus)
    if not corpus_path.is_file():
        raise UsageError(f"corpus {corpus_path} not readable")
    try:
        records = lab.load_corpus(corpus_path)
    except (ValueError, OSError) as exc:
        raise UsageError(f"corpus {corpus_path} unreadable: {exc}") from exc

    registry = make_registry(args)
    specs = (args.backends or "").split(",") if args.backends else [None]
    backends = [make_backend(args, spec or None) for spec in specs]
    matcher = make_matcher(args, backends[0])

    template = None
    if args.optimize:
        template = (
            lab.builtin_optimizer_template()
            if args.optimize == "builtin"
            else Path(args.optimize).read_text(encoding="utf-8")
        )

    result = lab.run_experiment(
        records, registry, backends, matcher=matcher, optimizer_template=template
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_results_csv(out_dir / "results.csv", result)
    (out_dir / "correlations.csv").write_text(
        lab.render_report(result.correlations, "csv"), encoding="utf-8"
    )
    (out_dir / "report.md").write_text(_experiment_markdown(result), encoding="utf-8")
    print(f"report written to {out_dir}", file=sys.stderr)

    if result.rows and all(r.error is not None for r in result.rows):
        print("error: every row failed", file=sys.stderr)
        return 1
    for row in result.failed_rows:
        print(f"row failed: {row.record.key} on {row.backend_id}: {row.error}", file=sys.stderr)
    return 0


def _write_results_csv(path: Path, result: lab.ExperimentResult) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(lab.RESULT_CSV_HEADER)
        for row in result.rows:
            writer.writerow(row.to_csv_row())


def _experiment_markdown(result: lab.ExperimentResult) -> str:
    lines = ["# Experiment report", "", "## Output quality vs requirement quality (Spearman rho)", ""]
    lines.append(lab.render_report(result.correlations, "markdown"))
    lines.append("## Mean gains (post - pre) by backend, group, variant")
    lines.append("")
    lines.append("| backend | group | variant | n | overall | requirement | output |")
    lines.append("| --- | --- | --- | --- | --- | --- | --- |")
    for g in result.gains:
        lines.append(
            f"| {g.backend_id} | {g.group} | {g.variant} | {g.n} "
            f"| {g.overall_gain:+.4f} | {g.requirement_gain:+.4f} | {g.output_gain:+.4f} |"
        )
    lines.append("")
    lines.append("## Defect counts (mean per participant)")
    lines.append("")
    lines.append("| group | variant | omissions pre | omissions post | commissions pre | commissions post |")
    lines.append("| --- | --- | --- | --- | --- | --- |")
    for d in result.defect_deltas:
        lines.append(
            f"| {d.group} | {d.variant} | {d.omissions_pre:.2f} | {d.omissions_post:.2f} "
            f"| {d.commissions_pre:.2f} | {d.commissions_post:.2f} |"
        )
    lines.append("")
    return "\n".join(lines)


def cmd_audit(args) -> int:
    annotations = audit_mod.load_annotations(args.annotations, log_path=args.log)
    table = audit_mod.audit_table(annotations)
    rendered = audit_mod.render_audit_table(table)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 0


if __name__ == "__main__":
    sys.exit(main())
