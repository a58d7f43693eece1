"""Aggregation of feedback-audit annotations over a session log.

Annotations answer the three audit questions per feedback act; this module
turns them into per-feedback-kind proportions over the five categories,
with "right feedback" defined as correct plus not-provided, and an
inter-annotator alpha when a second annotator's columns are present.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptLog, UnknownTurn
from .feedback import AuditCategory, audit_feedback
from .stats import krippendorff_alpha

ANNOTATION_FIELDS = ["turn_index", "kind", "needed", "provided", "correct"]
SECOND_ANNOTATOR_FIELDS = ["needed_2", "provided_2", "correct_2"]

CATEGORY_ORDER = (
    AuditCategory.CORRECT,
    AuditCategory.NOT_PROVIDED,
    AuditCategory.INCORRECT,
    AuditCategory.IRRELEVANT,
    AuditCategory.MISSING,
)


@dataclass(frozen=True)
class AuditAnnotation:
    turn_index: int
    kind: str
    category: AuditCategory
    category_2: AuditCategory | None = None


@dataclass(frozen=True)
class AuditRow:
    kind: str
    n: int
    proportions: tuple[tuple[AuditCategory, float], ...]
    right_total: float
    wrong_total: float
    alpha: float | None = None

    def proportion(self, category: AuditCategory) -> float:
        return dict(self.proportions)[category]


@dataclass(frozen=True)
class AuditTable:
    rows: tuple[AuditRow, ...]  # one per feedback kind plus a final "all" row


def load_annotations(path: str | Path, log_path: str | Path | None = None) -> list[AuditAnnotation]:
    """Read the annotations CSV; when a log is given, every annotated turn
    must exist in it."""
    valid_turns: set[int] | None = None
    if log_path is not None:
        valid_turns = _log_turn_indexes(Path(log_path))
    annotations: list[AuditAnnotation] = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in ANNOTATION_FIELDS if c not in fields]
        if missing:
            raise ValueError(f"annotations missing columns: {', '.join(missing)}")
        has_second = all(c in fields for c in SECOND_ANNOTATOR_FIELDS)
        for row in reader:
            turn_index = int(row["turn_index"])
            if valid_turns is not None and turn_index not in valid_turns:
                raise UnknownTurn(f"annotation references turn {turn_index}, absent from log")
            category = audit_feedback(
                _parse_bool(row["needed"]),
                _parse_bool(row["provided"]),
                _parse_optional_bool(row["correct"]),
            )
            category_2 = None
            if has_second and row["needed_2"].strip():
                category_2 = audit_feedback(
                    _parse_bool(row["needed_2"]),
                    _parse_bool(row["provided_2"]),
                    _parse_optional_bool(row["correct_2"]),
                )
            annotations.append(
                AuditAnnotation(
                    turn_index=turn_index,
                    kind=row["kind"],
                    category=category,
                    category_2=category_2,
                )
            )
    return annotations


def audit_table(annotations: list[AuditAnnotation]) -> AuditTable:
    kinds = sorted({a.kind for a in annotations})
    rows = [_audit_row(kind, [a for a in annotations if a.kind == kind]) for kind in kinds]
    rows.append(_audit_row("all", annotations))
    return AuditTable(rows=tuple(rows))


def _audit_row(kind: str, annotations: list[AuditAnnotation]) -> AuditRow:
    n = len(annotations)
    proportions = tuple(
        (cat, sum(1 for a in annotations if a.category is cat) / n if n else 0.0)
        for cat in CATEGORY_ORDER
    )
    by_cat = dict(proportions)
    right = by_cat[AuditCategory.CORRECT] + by_cat[AuditCategory.NOT_PROVIDED]
    wrong = (
        by_cat[AuditCategory.INCORRECT]
        + by_cat[AuditCategory.IRRELEVANT]
        + by_cat[AuditCategory.MISSING]
    )
    alpha = None
    doubly = [a for a in annotations if a.category_2 is not None]
    if len(doubly) >= 2:
        matrix = [
            [a.category.value for a in doubly],
            [a.category_2.value for a in doubly],
        ]
        try:
            alpha = krippendorff_alpha(matrix).value
        except Exception:  # noqa: BLE001 - degenerate agreement data stays blank
            alpha = None
    return AuditRow(
        kind=kind, n=n, proportions=proportions, right_total=right, wrong_total=wrong, alpha=alpha
    )


def render_audit_table(table: AuditTable) -> str:
    header = (
        "feedback_source,correct,not_provided,right_total,"
        "incorrect,irrelevant,missing,wrong_total,alpha"
    )
    lines = [header]
    for row in table.rows:
        cells = [row.kind]
        cells.extend(
            _pct(row.proportion(cat)) for cat in (AuditCategory.CORRECT, AuditCategory.NOT_PROVIDED)
        )
        cells.append(_pct(row.right_total))
        cells.extend(
            _pct(row.proportion(cat))
            for cat in (AuditCategory.INCORRECT, AuditCategory.IRRELEVANT, AuditCategory.MISSING)
        )
        cells.append(_pct(row.wrong_total))
        cells.append("" if row.alpha is None else f"{row.alpha:.2f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _pct(fraction: float) -> str:
    return f"{100.0 * fraction:.2f}"


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("true", "t", "yes", "y", "1"):
        return True
    if value in ("false", "f", "no", "n", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_optional_bool(raw: str) -> bool | None:
    if not raw.strip():
        return None
    return _parse_bool(raw)


def _log_turn_indexes(log_path: Path) -> set[int]:
    indexes: set[int] = set()
    try:
        lines = log_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorruptLog(1, f"unreadable log: {exc}") from exc
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            indexes.add(int(entry["turn_index"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLog(line_no, f"unreadable log line: {exc}") from exc
    return indexes
