"""Batch evaluation pipeline: optimizer pass, multi-backend grading, gains,
correlations, and report rendering.

Rows are processed independently with bounded parallelism; a failing row is
flagged and carried along rather than aborting the batch. All aggregate
statistics are pure functions of the graded rows.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import gateway, grading, output_grading, stats
from .bundles import TaskBundle, TaskRegistry
from .errors import DegenerateInput, UnsupportedFormat
from .gateway import BackendConfig, Message
from .grading import Matcher, RequirementAssessment, ScoreReport


@dataclass(frozen=True)
class PromptRecord:
    participant_id: str
    phase: str  # pre | post
    task_id: str
    variant: str  # original | optimized
    text: str
    group: str = "all"

    def __post_init__(self):
        if self.phase not in ("pre", "post"):
            raise ValueError(f"phase must be pre or post, got {self.phase!r}")
        if self.variant not in ("original", "optimized"):
            raise ValueError(f"variant must be original or optimized, got {self.variant!r}")

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.participant_id, self.phase, self.task_id, self.variant)


CORPUS_FIELDS = ["participant_id", "phase", "task_id", "variant", "prompt_path"]


def load_corpus(path: str | Path) -> list[PromptRecord]:
    """Read the prompt corpus CSV; prompt paths resolve relative to it.

    An optional trailing ``group`` column labels experiment groups; without
    it every record lands in group "all".
    """
    path = Path(path)
    records: list[PromptRecord] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CORPUS_FIELDS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"corpus is missing columns: {', '.join(missing)}")
        for row in reader:
            prompt_path = path.parent / row["prompt_path"]
            records.append(
                PromptRecord(
                    participant_id=row["participant_id"],
                    phase=row["phase"],
                    task_id=row["task_id"],
                    variant=row["variant"],
                    text=prompt_path.read_text(encoding="utf-8"),
                    group=row.get("group") or "all",
                )
            )
    seen = set()
    for record in records:
        if record.key in seen:
            raise ValueError(f"duplicate record {record.key}")
        seen.add(record.key)
    return records


def optimize_prompt(prompt: str, optimizer_template: str, backend: BackendConfig) -> str:
    """One gateway call rewriting a prompt through the optimizer template."""
    if "{user_prompt}" not in optimizer_template:
        raise ValueError("optimizer template needs a {user_prompt} placeholder")
    completion = gateway.complete(
        backend, [Message("user", optimizer_template.replace("{user_prompt}", prompt))]
    )
    return completion.text


def builtin_optimizer_template() -> str:
    return (Path(__file__).parent / "data" / "optimizer_template.txt").read_text(encoding="utf-8")


# --- result containers ---------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    record: PromptRecord
    backend_id: str
    assessment: RequirementAssessment | None
    report: ScoreReport | None
    error: str | None = None

    def to_csv_row(self) -> list[str]:
        rec = self.record
        if self.error is not None or self.report is None:
            return [rec.participant_id, rec.group, rec.phase, rec.task_id, rec.variant,
                    self.backend_id, "", "", "", "", "", self.error or "unknown error"]
        rep = self.report
        return [
            rec.participant_id, rec.group, rec.phase, rec.task_id, rec.variant,
            self.backend_id,
            _fmt(rep.requirement_quality),
            _fmt(rep.llm_output_quality),
            _fmt(rep.overall),
            str(rep.omission_count),
            str(rep.commission_count),
            "",
        ]


RESULT_CSV_HEADER = [
    "participant_id", "group", "phase", "task_id", "variant", "backend",
    "requirement_quality", "llm_output_quality", "overall",
    "omission_count", "commission_count", "error",
]


def _fmt(value: Fraction | float | None) -> str:
    if value is None:
        return ""
    return f"{float(value):.4f}"


@dataclass(frozen=True)
class CorrelationTable:
    """Spearman rho of output quality against requirement quality, by task
    (rows) and backend (columns), with a pooled Overall row."""

    backends: tuple[str, ...]
    task_rows: tuple[tuple[str, tuple[float | None, ...]], ...]
    overall: tuple[float | None, ...]


@dataclass(frozen=True)
class GainRow:
    backend_id: str
    group: str
    variant: str
    n: int
    overall_gain: float
    requirement_gain: float
    output_gain: float


@dataclass(frozen=True)
class DefectDelta:
    group: str
    variant: str
    omissions_pre: float
    omissions_post: float
    commissions_pre: float
    commissions_post: float


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...]
    correlations: CorrelationTable
    gains: tuple[GainRow, ...]
    defect_deltas: tuple[DefectDelta, ...]

    @property
    def failed_rows(self) -> tuple[ResultRow, ...]:
        return tuple(r for r in self.rows if r.error is not None)


# --- pipeline --------------------------------------------------------------------


def run_experiment(
    records: Sequence[PromptRecord],
    registry: TaskRegistry,
    backends: Sequence[BackendConfig],
    matcher: Matcher = grading.DETERMINISTIC,
    grader: str = "auto_judge",
    optimizer_template: str | None = None,
    optimizer_backend: BackendConfig | None = None,
    max_workers: int = 4,
) -> ExperimentResult:
    """Grade every record on every backend and aggregate the analysis chain.

    With an optimizer template, each original record additionally yields an
    optimized variant before grading. Failed rows are flagged, never fatal.
    """
    work = list(records)
    if optimizer_template is not None:
        opt_backend = optimizer_backend or backends[0]
        for record in list(work):
            if record.variant != "original":
                continue
            optimized_text = optimize_prompt(record.text, optimizer_template, opt_backend)
            work.append(replace(record, variant="optimized", text=optimized_text))

    tasks = [(record, backend) for record in work for backend in backends]

    def _grade(pair: tuple[PromptRecord, BackendConfig]) -> ResultRow:
        record, backend = pair
        try:
            bundle = registry.get(record.task_id)
            extracted = grading.extract_requirements(record.text, matcher)
            assessment = grading.classify_defects(extracted, bundle.reference_requirements, matcher)
            artifact = output_grading.generate_output(record.text, bundle, backend)
            grade = output_grading.grade_output(artifact, bundle, grader, backend=backend)
            report = grading.score_report(assessment, grade.llm_output_quality)
            return ResultRow(record, backend.backend_id, assessment, report)
        except Exception as exc:  # noqa: BLE001 - flagged per row
            return ResultRow(record, backend.backend_id, None, None, error=f"{type(exc).__name__}: {exc}")

    if max_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = tuple(pool.map(_grade, tasks))
    else:
        rows = tuple(_grade(t) for t in tasks)

    backend_ids = tuple(b.backend_id for b in backends)
    return ExperimentResult(
        rows=rows,
        correlations=_correlations(rows, backend_ids),
        gains=_gains(rows, backend_ids),
        defect_deltas=_defect_deltas(rows, backend_ids[0] if backend_ids else ""),
    )


def _correlations(rows: Sequence[ResultRow], backend_ids: tuple[str, ...]) -> CorrelationTable:
    task_order: list[str] = []
    for row in rows:
        if row.record.task_id not in task_order:
            task_order.append(row.record.task_id)

    def rho(selected: list[ResultRow]) -> float | None:
        xs = [float(r.report.requirement_quality) for r in selected]
        ys = [float(r.report.llm_output_quality) for r in selected]
        try:
            return stats.spearman_rho(xs, ys).value
        except DegenerateInput:
            return None

    def usable(task_id: str | None, backend_id: str) -> list[ResultRow]:
        return [
            r
            for r in rows
            if r.backend_id == backend_id
            and r.error is None
            and r.report is not None
            and r.report.llm_output_quality is not None
            and (task_id is None or r.record.task_id == task_id)
        ]

    task_rows = tuple(
        (task, tuple(rho(usable(task, b)) for b in backend_ids)) for task in task_order
    )
    overall = tuple(rho(usable(None, b)) for b in backend_ids)
    return CorrelationTable(backends=backend_ids, task_rows=task_rows, overall=overall)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _gains(rows: Sequence[ResultRow], backend_ids: tuple[str, ...]) -> tuple[GainRow, ...]:
    """Mean post-pre gains per backend, group, and variant.

    The optimized variant's gain is optimized-post minus original-pre, so it
    reads as "what the optimizer adds on top of where participants started".
    """
    out: list[GainRow] = []
    ok = [r for r in rows if r.error is None and r.report is not None and r.report.overall is not None]
    for backend_id in backend_ids:
        pool = [r for r in ok if r.backend_id == backend_id]
        groups = sorted({r.record.group for r in pool})
        variants = sorted({r.record.variant for r in pool})
        for group in groups:
            for variant in variants:
                gains = _participant_gains(pool, group, variant)
                if gains:
                    out.append(
                        GainRow(
                            backend_id=backend_id,
                            group=group,
                            variant=variant,
                            n=len(gains),
                            overall_gain=_mean([g[0] for g in gains]),
                            requirement_gain=_mean([g[1] for g in gains]),
                            output_gain=_mean([g[2] for g in gains]),
                        )
                    )
    return tuple(out)


def _participant_gains(
    pool: list[ResultRow], group: str, variant: str
) -> list[tuple[float, float, float]]:
    participants = sorted({r.record.participant_id for r in pool if r.record.group == group})
    gains = []
    for pid in participants:
        # Baseline is always the participant's original pre-test prompts.
        pre = [
            r.report
            for r in pool
            if r.record.participant_id == pid
            and r.record.group == group
            and r.record.phase == "pre"
            and r.record.variant == "original"
        ]
        post = [
            r.report
            for r in pool
            if r.record.participant_id == pid
            and r.record.group == group
            and r.record.phase == "post"
            and r.record.variant == variant
        ]
        if not pre or not post:
            continue
        gains.append(
            (
                _mean([float(p.overall) for p in post]) - _mean([float(p.overall) for p in pre]),
                _mean([float(p.requirement_quality) for p in post])
                - _mean([float(p.requirement_quality) for p in pre]),
                _mean([float(p.llm_output_quality) for p in post])
                - _mean([float(p.llm_output_quality) for p in pre]),
            )
        )
    return gains


def _defect_deltas(rows: Sequence[ResultRow], backend_id: str) -> tuple[DefectDelta, ...]:
    """Mean omission and commission counts pre vs post per group/variant.

    Defect counts come from the assessment alone, so a single backend's rows
    suffice.
    """
    ok = [
        r
        for r in rows
        if r.backend_id == backend_id and r.error is None and r.report is not None
    ]
    out = []
    for group in sorted({r.record.group for r in ok}):
        for variant in sorted({r.record.variant for r in ok}):
            def counts(phase: str, want_variant: str) -> list[ScoreReport]:
                return [
                    r.report
                    for r in ok
                    if r.record.group == group
                    and r.record.phase == phase
                    and r.record.variant == want_variant
                ]

            pre = counts("pre", "original")
            post = counts("post", variant)
            if not pre or not post:
                continue
            out.append(
                DefectDelta(
                    group=group,
                    variant=variant,
                    omissions_pre=_mean([float(p.omission_count) for p in pre]),
                    omissions_post=_mean([float(p.omission_count) for p in post]),
                    commissions_pre=_mean([float(p.commission_count) for p in pre]),
                    commissions_post=_mean([float(p.commission_count) for p in post]),
                )
            )
    return tuple(out)


# --- report rendering -------------------------------------------------------------


def render_report(table: CorrelationTable, format: str) -> str:
    """Render the by-task correlation table; rows per task, columns per
    backend, Overall last."""
    if format == "csv":
        lines = ["task," + ",".join(table.backends)]
        for task, values in table.task_rows:
            lines.append(task + "," + ",".join(_cell(v) for v in values))
        lines.append("Overall," + ",".join(_cell(v) for v in table.overall))
        return "\n".join(lines) + "\n"
    if format == "markdown":
        header = "| task | " + " | ".join(table.backends) + " |"
        rule = "| --- |" + " --- |" * len(table.backends)
        lines = [header, rule]
        for task, values in table.task_rows:
            lines.append("| " + task + " | " + " | ".join(_cell(v) for v in values) + " |")
        lines.append("| **Overall** | " + " | ".join(_cell(v) for v in table.overall) + " |")
        return "\n".join(lines) + "\n"
    raise UnsupportedFormat(f"unknown report format {format!r}")


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def load_correlation_csv(path: str | Path) -> CorrelationTable:
    """Read a correlation table in the render_report CSV shape."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    backends = tuple(header[1:])
    task_rows = []
    overall: tuple[float | None, ...] = tuple(None for _ in backends)
    for line in lines[1:]:
        parts = line.split(",")
        values = tuple(float(p) if p else None for p in parts[1:])
        if parts[0] == "Overall":
            overall = values
        else:
            task_rows.append((parts[0], values))
    return CorrelationTable(backends=backends, task_rows=tuple(task_rows), overall=overall)


def reference_stats_dir() -> Path:
    return Path(__file__).parent / "data" / "reference_stats"
