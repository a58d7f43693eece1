"""Requirement extraction, reference alignment, defect classification, scores.

Two matcher modes: the deterministic matcher runs entirely offline on token
overlap and keyed numeric comparison; the judge matcher asks an LLM backend
per reference with a fixed structured-output instruction and falls back to
the deterministic verdict item-wise whenever a reply cannot be parsed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from . import textnorm
from .bundles import Requirement
from .errors import JudgeUnavailable, OutOfRange


class DefectKind(str, Enum):
    OMISSION = "omission"
    COMMISSION_INCORRECT = "commission_incorrect"
    COMMISSION_INCONSISTENT = "commission_inconsistent"
    COMMISSION_AMBIGUOUS = "commission_ambiguous"

    @property
    def is_commission(self) -> bool:
        return self is not DefectKind.OMISSION


COMMISSION_KINDS = (
    DefectKind.COMMISSION_INCORRECT,
    DefectKind.COMMISSION_INCONSISTENT,
    DefectKind.COMMISSION_AMBIGUOUS,
)


@dataclass(frozen=True)
class ExtractedRequirement:
    text: str
    source_span: tuple[int, int]
    normalized: str

    @classmethod
    def from_span(cls, prompt: str, span: tuple[int, int]) -> "ExtractedRequirement":
        text = prompt[span[0] : span[1]]
        return cls(text=text, source_span=span, normalized=textnorm.normalize(text))


@dataclass(frozen=True)
class ReferenceVerdict:
    requirement_id: str
    defect: DefectKind | None  # None means correctly described
    evidence: ExtractedRequirement | None = None

    def __post_init__(self):
        if self.defect is DefectKind.OMISSION and self.evidence is not None:
            raise ValueError("omission verdicts carry no evidence")
        if self.defect is not None and self.defect.is_commission and self.evidence is None:
            raise ValueError("commission verdicts carry evidence")

    @property
    def correct(self) -> bool:
        return self.defect is None


@dataclass(frozen=True)
class RequirementAssessment:
    verdicts: tuple[ReferenceVerdict, ...]
    extraneous: tuple[ExtractedRequirement, ...] = ()

    def __post_init__(self):
        ids = [v.requirement_id for v in self.verdicts]
        if len(ids) != len(set(ids)):
            raise ValueError("each reference id appears exactly once")

    def verdict_for(self, requirement_id: str) -> ReferenceVerdict:
        for v in self.verdicts:
            if v.requirement_id == requirement_id:
                return v
        raise KeyError(requirement_id)

    @property
    def correct_ids(self) -> tuple[str, ...]:
        return tuple(v.requirement_id for v in self.verdicts if v.correct)

    def to_dict(self) -> dict:
        return {
            "per_reference": [
                {
                    "requirement_id": v.requirement_id,
                    "status": "correct" if v.correct else v.defect.value,
                    "evidence": _extracted_to_dict(v.evidence),
                }
                for v in self.verdicts
            ],
            "extraneous": [_extracted_to_dict(e) for e in self.extraneous],
        }


def _extracted_to_dict(item: ExtractedRequirement | None) -> dict | None:
    if item is None:
        return None
    return {"text": item.text, "source_span": list(item.source_span), "normalized": item.normalized}


def assessment_from_dict(raw: dict) -> RequirementAssessment:
    def _extracted(obj):
        if obj is None:
            return None
        return ExtractedRequirement(
            text=obj["text"], source_span=tuple(obj["source_span"]), normalized=obj["normalized"]
        )

    verdicts = []
    for entry in raw["per_reference"]:
        status = entry["status"]
        defect = None if status == "correct" else DefectKind(status)
        verdicts.append(
            ReferenceVerdict(
                requirement_id=entry["requirement_id"],
                defect=defect,
                evidence=_extracted(entry.get("evidence")),
            )
        )
    return RequirementAssessment(
        verdicts=tuple(verdicts),
        extraneous=tuple(_extracted(e) for e in raw.get("extraneous", [])),
    )


@dataclass(frozen=True)
class ScoreReport:
    requirement_quality: Fraction
    llm_output_quality: Fraction | None
    overall: Fraction | None
    omission_count: int
    commission_counts: tuple[tuple[DefectKind, int], ...]

    @property
    def commission_count(self) -> int:
        return sum(n for _, n in self.commission_counts)

    def to_dict(self) -> dict:
        return {
            "requirement_quality": float(self.requirement_quality),
            "llm_output_quality": None if self.llm_output_quality is None else float(self.llm_output_quality),
            "overall": None if self.overall is None else float(self.overall),
            "omission_count": self.omission_count,
            "commission_counts": {kind.value: n for kind, n in self.commission_counts},
        }


# --- matcher configuration ---------------------------------------------------

@dataclass(frozen=True)
class Matcher:
    """Matching behavior for extraction and classification.

    ``mode`` is "deterministic" or "judge"; judge mode additionally needs a
    gateway backend. Thresholds apply to Jaccard overlap of content tokens.
    """

    mode: str = "deterministic"
    match_threshold: float = 0.5
    ambiguity_threshold: float = 0.3
    backend: object | None = None  # gateway.BackendConfig for judge mode

    def __post_init__(self):
        if self.mode not in ("deterministic", "judge"):
            raise ValueError(f"unknown matcher mode {self.mode!r}")
        if not 0 < self.ambiguity_threshold <= self.match_threshold <= 1:
            raise ValueError("need 0 < ambiguity_threshold <= match_threshold <= 1")
        if self.mode == "judge" and self.backend is None:
            raise ValueError("judge mode needs a backend")


DETERMINISTIC = Matcher()


# --- extraction ---------------------------------------------------------------

def extract_requirements(
    prompt: str, matcher: Matcher = DETERMINISTIC
) -> tuple[ExtractedRequirement, ...]:
    """Split a prompt into requirement clauses with source spans.

    Deterministic mode segments on sentence and list-item boundaries. Judge
    mode asks the backend for the clause list and keeps it only when every
    clause maps back to a verbatim, in-order span of the prompt.
    """
    if matcher.mode == "judge":
        clauses = _judge_extract(prompt, matcher)
        if clauses is not None:
            return clauses
    spans = textnorm.segment_clauses(prompt)
    return tuple(ExtractedRequirement.from_span(prompt, span) for span in spans)


_JUDGE_EXTRACT_INSTRUCTION = (
    "Split the prompt below into individual requirement clauses. Reply with "
    'JSON only, shaped {"clauses": ["..."]}, where every clause is copied '
    "verbatim from the prompt."
)


def _judge_extract(prompt: str, matcher: Matcher) -> tuple[ExtractedRequirement, ...] | None:
    from . import gateway

    messages = [
        gateway.Message("system", _JUDGE_EXTRACT_INSTRUCTION),
        gateway.Message("user", prompt),
    ]
    try:
        completion = gateway.complete(matcher.backend, messages)
    except gateway.BackendError as exc:
        raise JudgeUnavailable(str(exc)) from exc
    payload = _parse_json_block(completion.text)
    if not isinstance(payload, dict):
        return None
    clauses = payload.get("clauses")
    if not isinstance(clauses, list) or any(not isinstance(c, str) for c in clauses):
        return None
    out: list[ExtractedRequirement] = []
    cursor = 0
    for clause in clauses:
        clause = clause.strip()
        if not clause:
            return None
        start = prompt.find(clause, cursor)
        if start < 0:
            return None
        cursor = start + len(clause)
        out.append(ExtractedRequirement.from_span(prompt, (start, cursor)))
    return tuple(out)


# --- classification -----------------------------------------------------------

def classify_defects(
    extracted: Sequence[ExtractedRequirement],
    refs: Sequence[Requirement],
    matcher: Matcher = DETERMINISTIC,
) -> RequirementAssessment:
    """Mark each reference requirement correct, omitted, or a commission kind."""
    deterministic = [_deterministic_verdict(extracted, ref, matcher) for ref in refs]
    if matcher.mode == "judge":
        verdicts = tuple(
            _judge_verdict(extracted, ref, matcher, fallback)
            for ref, fallback in zip(refs, deterministic)
        )
    else:
        verdicts = tuple(deterministic)
    return RequirementAssessment(
        verdicts=verdicts, extraneous=_extraneous(extracted, refs, matcher)
    )


@dataclass(frozen=True)
class _ClauseView:
    index: int
    clause: ExtractedRequirement
    content: frozenset[str] = field(default_factory=frozenset)
    tokens: frozenset[str] = field(default_factory=frozenset)
    numbers: tuple[str, ...] = ()
    keyed: tuple[tuple[str, str], ...] = ()


def _view(index: int, clause: ExtractedRequirement) -> _ClauseView:
    return _ClauseView(
        index=index,
        clause=clause,
        content=frozenset(textnorm.content_tokens(clause.text)),
        tokens=frozenset(textnorm.tokenize(clause.text)),
        numbers=tuple(sorted(textnorm.numbers(clause.text))),
        keyed=tuple(sorted(textnorm.keyed_numbers(clause.text).items())),
    )


def _deterministic_verdict(
    extracted: Sequence[ExtractedRequirement], ref: Requirement, matcher: Matcher
) -> ReferenceVerdict:
    ref_content = set(textnorm.content_tokens(ref.text))
    views = [_view(i, c) for i, c in enumerate(extracted)]
    scored = [(textnorm.jaccard(v.content, ref_content), v) for v in views]
    strong = [(s, v) for s, v in scored if s >= matcher.match_threshold]

    if len(strong) >= 2:
        conflicting = _internal_conflict([v for _, v in strong])
        if conflicting is not None:
            return ReferenceVerdict(
                ref.id, DefectKind.COMMISSION_INCONSISTENT, conflicting.clause
            )

    if strong:
        best = max(strong, key=lambda sv: (sv[0], -sv[1].index))[1]
        return _numeric_verdict(ref, best)

    weak = [(s, v) for s, v in scored if matcher.ambiguity_threshold <= s < matcher.match_threshold]
    if weak:
        best = max(weak, key=lambda sv: (sv[0], -sv[1].index))[1]
        return ReferenceVerdict(ref.id, DefectKind.COMMISSION_AMBIGUOUS, best.clause)

    return ReferenceVerdict(ref.id, DefectKind.OMISSION, None)


def _internal_conflict(views: list[_ClauseView]) -> _ClauseView | None:
    """Second clause of the first pair of strong matches with conflicting
    keyed values: the prompt contradicts itself about this reference."""
    for i, a in enumerate(views):
        keyed_a = dict(a.keyed)
        for b in views[i + 1 :]:
            for key, value in b.keyed:
                if key in keyed_a and keyed_a[key] != value:
                    return b
    return None


def _numeric_verdict(ref: Requirement, best: _ClauseView) -> ReferenceVerdict:
    ref_keyed = textnorm.keyed_numbers(ref.text)
    clause_keyed = dict(best.keyed)
    for key, value in ref_keyed.items():
        if key in clause_keyed and clause_keyed[key] != value:
            return ReferenceVerdict(ref.id, DefectKind.COMMISSION_INCORRECT, best.clause)

    ref_numbers = textnorm.numbers(ref.text)
    clause_numbers = list(best.numbers)
    for num in ref_numbers:
        if num in clause_numbers:
            clause_numbers.remove(num)
        else:
            # Reference carries a numeric detail the clause leaves out.
            return ReferenceVerdict(ref.id, DefectKind.COMMISSION_AMBIGUOUS, best.clause)

    for qualifier in ref.qualifiers:
        wanted = textnorm.tokenize(qualifier)
        if not all(tok in best.tokens for tok in wanted):
            return ReferenceVerdict(ref.id, DefectKind.COMMISSION_AMBIGUOUS, best.clause)

    return ReferenceVerdict(ref.id, None, best.clause)


def _extraneous(
    extracted: Sequence[ExtractedRequirement],
    refs: Sequence[Requirement],
    matcher: Matcher,
) -> tuple[ExtractedRequirement, ...]:
    ref_contents = [set(textnorm.content_tokens(r.text)) for r in refs]
    out = []
    for clause in extracted:
        content = set(textnorm.content_tokens(clause.text))
        best = max((textnorm.jaccard(content, rc) for rc in ref_contents), default=0.0)
        if best < matcher.ambiguity_threshold:
            out.append(clause)
    return tuple(out)


_JUDGE_CLASSIFY_INSTRUCTION = (
    "You check whether a drafted requirement list covers one reference "
    "requirement. Reply with JSON only, shaped "
    '{"status": "correct"|"omission"|"incorrect"|"inconsistent"|"ambiguous", '
    '"evidence_index": <clause number or null>}.'
)

_JUDGE_STATUS = {
    "correct": None,
    "omission": DefectKind.OMISSION,
    "incorrect": DefectKind.COMMISSION_INCORRECT,
    "inconsistent": DefectKind.COMMISSION_INCONSISTENT,
    "ambiguous": DefectKind.COMMISSION_AMBIGUOUS,
}


def _judge_verdict(
    extracted: Sequence[ExtractedRequirement],
    ref: Requirement,
    matcher: Matcher,
    fallback: ReferenceVerdict,
) -> ReferenceVerdict:
    from . import gateway

    clause_list = "\n".join(f"{i}: {c.text}" for i, c in enumerate(extracted)) or "(none)"
    messages = [
        gateway.Message("system", _JUDGE_CLASSIFY_INSTRUCTION),
        gateway.Message("user", f"REFERENCE: {ref.text}\nCLAUSES:\n{clause_list}"),
    ]
    try:
        completion = gateway.complete(matcher.backend, messages)
    except gateway.BackendError as exc:
        raise JudgeUnavailable(str(exc)) from exc

    payload = _parse_json_block(completion.text)
    if not isinstance(payload, dict):
        return fallback
    defect = _JUDGE_STATUS.get(payload.get("status"), "bad")
    if defect == "bad":
        return fallback
    index = payload.get("evidence_index")
    evidence = None
    if isinstance(index, int) and 0 <= index < len(extracted):
        evidence = extracted[index]
    if defect is DefectKind.OMISSION:
        return ReferenceVerdict(ref.id, defect, None)
    if defect is not None and evidence is None:
        return fallback  # commission without usable evidence is malformed
    return ReferenceVerdict(ref.id, defect, evidence)


def _parse_json_block(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if 0 <= start < end:
        try:
            return json.loads(text[start : end + 1])
        except ValueError:
            return None
    return None


# --- scores -------------------------------------------------------------------

def requirement_quality(assessment: RequirementAssessment) -> Fraction:
    """Fraction of reference requirements correctly described."""
    total = len(assessment.verdicts)
    correct = sum(1 for v in assessment.verdicts if v.correct)
    return Fraction(correct, total)


def overall_score(req_q: Fraction | float, out_q: Fraction | float) -> Fraction:
    """Unweighted mean of the two component scores."""
    req_q, out_q = Fraction(req_q), Fraction(out_q)
    for name, value in (("requirement quality", req_q), ("output quality", out_q)):
        if not 0 <= value <= 1:
            raise OutOfRange(f"{name} must be within [0, 1], got {value}")
    return (req_q + out_q) / 2


def count_defects(assessment: RequirementAssessment) -> tuple[int, dict[DefectKind, int]]:
    """(omission count, per-kind commission counts); together they partition
    the defective verdicts."""
    omissions = 0
    commissions = {kind: 0 for kind in COMMISSION_KINDS}
    for verdict in assessment.verdicts:
        if verdict.defect is DefectKind.OMISSION:
            omissions += 1
        elif verdict.defect is not None:
            commissions[verdict.defect] += 1
    return omissions, commissions


def score_report(
    assessment: RequirementAssessment, output_quality: Fraction | None = None
) -> ScoreReport:
    req_q = requirement_quality(assessment)
    omissions, commissions = count_defects(assessment)
    overall = None if output_quality is None else overall_score(req_q, output_quality)
    return ScoreReport(
        requirement_quality=req_q,
        llm_output_quality=output_quality,
        overall=overall,
        omission_count=omissions,
        commission_counts=tuple(commissions.items()),
    )
