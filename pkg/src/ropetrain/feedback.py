"""Defect selection and the three training feedback channels, plus the
audit classifier used to validate feedback quality.

Feedback per learner turn is at most one chat hint targeting the most
critical defect, every newly earned reference reveal, and at most one
output counterfactual. Hints are post-filtered so they never leak long
verbatim runs of an unrevealed reference requirement; generation failures
degrade to canned hints so a training turn never stalls on backend errors.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from . import gateway, textnorm
from .bundles import Requirement, TaskBundle, TaskKind
from .errors import BackendError, IllegalCombination, NotApplicable
from .gateway import BackendConfig, Message
from .grading import DefectKind, RequirementAssessment

# Hints may not contain this many consecutive content tokens of an
# unrevealed reference text. Configurable per call.
DEFAULT_LEAK_RUN = 5
MAX_HINT_ATTEMPTS = 3

CANNED_HINT = "Something about {category} needs another look."

COUNTERFACTUAL_KINDS = (DefectKind.COMMISSION_INCORRECT, DefectKind.COMMISSION_AMBIGUOUS)


class FeedbackKind(str, Enum):
    CHAT_HINT = "chat_hint"
    REFERENCE_REVEAL = "reference_reveal"
    OUTPUT_COUNTERFACTUAL = "output_counterfactual"


@dataclass(frozen=True)
class FeedbackEvent:
    kind: FeedbackKind
    target: str | None
    content: str
    turn_index: int
    artifact_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "content": self.content,
            "turn_index": self.turn_index,
            "artifact_hash": self.artifact_hash,
        }


def event_from_dict(raw: dict) -> FeedbackEvent:
    return FeedbackEvent(
        kind=FeedbackKind(raw["kind"]),
        target=raw.get("target"),
        content=raw["content"],
        turn_index=raw["turn_index"],
        artifact_hash=raw.get("artifact_hash"),
    )


class ArtifactStore:
    """Content-addressed text artifacts under one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        path = self.root / f"{digest}.txt"
        if not path.exists():
            path.write_text(text, encoding="utf-8")
        return digest

    def get(self, digest: str) -> str:
        path = self.root / f"{digest}.txt"
        if not path.is_file():
            raise KeyError(digest)
        return path.read_text(encoding="utf-8")


# --- defect selection ---------------------------------------------------------

_PRIORITY_CLASSES: tuple[tuple[DefectKind, ...], ...] = (
    (DefectKind.COMMISSION_INCORRECT, DefectKind.COMMISSION_INCONSISTENT),
    (DefectKind.OMISSION,),
    (DefectKind.COMMISSION_AMBIGUOUS,),
)


def select_defect(assessment: RequirementAssessment) -> tuple[str, DefectKind] | None:
    """Most critical defect: mismatched first, then missing, then ambiguous;
    ties broken by reference document order. None when defect-free."""
    for priority_class in _PRIORITY_CLASSES:
        for verdict in assessment.verdicts:
            if verdict.defect in priority_class:
                return verdict.requirement_id, verdict.defect
    return None


# --- chat hints ----------------------------------------------------------------

_HINT_SYSTEM = (
    "You are a requirements tutor. Reply with one short hint (at most two "
    "sentences). Never quote or paraphrase the reference requirement wording."
)

_HINT_USER_OMISSION = (
    "The learner has not stated a requirement in the area: {category}. "
    "Ask one Socratic question that points them toward that missing area.\n"
    "REFERENCE (do not reveal): {reference}\nLEARNER DRAFT:\n{draft}"
)

_HINT_USER_COMMISSION = (
    "A stated requirement conflicts with the reference ({flavor}). Ask the "
    "learner to re-examine the conflicting detail without giving the answer.\n"
    "REFERENCE (do not reveal): {reference}\nLEARNER STATEMENT: {statement}"
)


def make_chat_hint(
    defect: tuple[str, DefectKind],
    bundle: TaskBundle,
    context: "SessionContext",
    backend: BackendConfig,
    leak_run: int = DEFAULT_LEAK_RUN,
) -> FeedbackEvent:
    """Generate a hint for the selected defect.

    Any generated hint containing ``leak_run`` consecutive content tokens of
    an unrevealed reference is rejected and regenerated; after bounded
    retries, or on backend errors, a canned template hint is emitted instead.
    """
    requirement_id, kind = defect
    requirement = bundle.requirement(requirement_id)
    unrevealed = [
        r.text for r in bundle.reference_requirements if r.id not in context.revealed
    ]
    if kind is DefectKind.OMISSION:
        user = _HINT_USER_OMISSION.format(
            category=requirement.category,
            reference=requirement.text,
            draft="\n".join(context.working_doc) or "(empty)",
        )
    else:
        user = _HINT_USER_COMMISSION.format(
            flavor=kind.value.removeprefix("commission_"),
            reference=requirement.text,
            statement=context.evidence_text or "(not captured)",
        )
    messages = [Message("system", _HINT_SYSTEM), Message("user", user)]

    content = None
    for attempt in range(MAX_HINT_ATTEMPTS):
        try:
            completion = gateway.complete(
                backend, messages, temperature=gateway.TEMPERATURE_CHAT
            )
        except BackendError:
            break
        candidate = completion.text.strip()
        if candidate and not hint_leaks(candidate, unrevealed, leak_run):
            content = candidate
            break
        # Nudge the regeneration so cassette/mock fingerprints differ per attempt.
        messages = messages + [
            Message("assistant", candidate),
            Message("user", "That reveals too much reference wording. Try again, more indirectly."),
        ]
    if content is None:
        content = CANNED_HINT.format(category=requirement.category)
    return FeedbackEvent(
        kind=FeedbackKind.CHAT_HINT,
        target=requirement_id,
        content=content,
        turn_index=context.turn_index,
    )


def hint_leaks(hint: str, unrevealed_texts: Iterable[str], leak_run: int = DEFAULT_LEAK_RUN) -> bool:
    return any(textnorm.has_token_run(hint, text, leak_run) for text in unrevealed_texts)


@dataclass(frozen=True)
class SessionContext:
    """What hint generation needs to know about the live session."""

    revealed: frozenset[str]
    working_doc: tuple[str, ...]
    turn_index: int
    evidence_text: str | None = None


# --- reference reveals -----------------------------------------------------------

def maybe_reveal(
    assessment: RequirementAssessment,
    revealed: frozenset[str] | set[str],
    bundle: TaskBundle,
    turn_index: int,
) -> list[FeedbackEvent]:
    """Reveal exactly the requirements newly assessed correct, in reference
    order. Already revealed ids are never re-revealed."""
    events = []
    newly = set(assessment.correct_ids) - set(revealed)
    for requirement in bundle.reference_requirements:
        if requirement.id in newly:
            events.append(
                FeedbackEvent(
                    kind=FeedbackKind.REFERENCE_REVEAL,
                    target=requirement.id,
                    content=requirement.text,
                    turn_index=turn_index,
                )
            )
    return events


# --- output counterfactuals -------------------------------------------------------

_COUNTERFACTUAL_SYSTEM = (
    "You edit a reference program so it faithfully exhibits a learner's "
    "requirement defect. Change only what this defect implies; keep everything "
    "else identical. Output only the edited program source."
)

_COUNTERFACTUAL_USER = "REFERENCE PROGRAM:\n{source}\n\nDEFECT: {defect}"


def make_counterfactual(
    defect: tuple[str, DefectKind],
    bundle: TaskBundle,
    backend: BackendConfig,
    store: ArtifactStore,
    turn_index: int,
    evidence_text: str | None = None,
) -> FeedbackEvent | None:
    """Produce the output-counterfactual feedback for an incorrect or
    ambiguous requirement.

    Code bundles get a minimally edited reference program implementing the
    learner's reading; app bundles fall back to the bundle's static
    illustrative transcript for that requirement, if one exists. Backend
    failures yield no event so the turn stays hint-only.
    """
    requirement_id, kind = defect
    if kind not in COUNTERFACTUAL_KINDS:
        raise NotApplicable(f"counterfactuals target incorrect or ambiguous defects, not {kind.value}")
    requirement = bundle.requirement(requirement_id)

    if bundle.kind is TaskKind.GPT_APP:
        if requirement.illustration_example_id is None:
            return None
        example = bundle.example(requirement.illustration_example_id)
        if example is None:
            return None
        digest = store.put(example.payload)
        return FeedbackEvent(
            kind=FeedbackKind.OUTPUT_COUNTERFACTUAL,
            target=requirement_id,
            content=f"Illustrative conversation for: {requirement.category}",
            turn_index=turn_index,
            artifact_hash=digest,
        )

    defect_desc = _describe_defect(requirement, kind, evidence_text)
    try:
        completion = gateway.complete(
            backend,
            [
                Message("system", _COUNTERFACTUAL_SYSTEM),
                Message(
                    "user",
                    _COUNTERFACTUAL_USER.format(source=bundle.reference_artifact, defect=defect_desc),
                ),
            ],
            temperature=gateway.TEMPERATURE_CODE_EDIT,
        )
    except BackendError:
        return None
    edited = completion.text.strip()
    if not edited:
        return None
    digest = store.put(edited)
    return FeedbackEvent(
        kind=FeedbackKind.OUTPUT_COUNTERFACTUAL,
        target=requirement_id,
        content=f"Program variant acting on your stated reading ({kind.value.removeprefix('commission_')}).",
        turn_index=turn_index,
        artifact_hash=digest,
    )


def _describe_defect(requirement: Requirement, kind: DefectKind, evidence_text: str | None) -> str:
    if kind is DefectKind.COMMISSION_INCORRECT:
        head = "The learner stated this requirement incorrectly"
    else:
        head = "The learner stated this requirement ambiguously; misinterpret it maliciously"
    stated = f" as: {evidence_text}" if evidence_text else ""
    return f"{head}{stated}. The affected reference requirement concerns: {requirement.category}."


# --- feedback audit ----------------------------------------------------------------

class AuditCategory(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    IRRELEVANT = "irrelevant"
    MISSING = "missing"
    NOT_PROVIDED = "not_provided"


RIGHT_CATEGORIES = (AuditCategory.CORRECT, AuditCategory.NOT_PROVIDED)


def audit_feedback(needed: bool, provided: bool, correct: bool | None = None) -> AuditCategory:
    """Classify one feedback act from the three audit questions.

    ``correct`` must be supplied exactly when the feedback was provided.
    """
    if provided and correct is None:
        raise IllegalCombination("provided feedback needs a correctness judgment")
    if not provided and correct is not None:
        raise IllegalCombination("correctness applies only to provided feedback")
    if needed and provided:
        return AuditCategory.CORRECT if correct else AuditCategory.INCORRECT
    if not needed and provided:
        return AuditCategory.IRRELEVANT
    if needed:
        return AuditCategory.MISSING
    return AuditCategory.NOT_PROVIDED


@dataclass(frozen=True)
class FeedbackAudit:
    needed: bool
    provided: bool
    correct: bool | None = None

    @property
    def category(self) -> AuditCategory:
        return audit_feedback(self.needed, self.provided, self.correct)
