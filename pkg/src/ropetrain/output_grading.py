"""Generate LLM outputs from learner prompts and grade them against rubrics.

Code tasks produce one source completion; app tasks produce one chat
transcript per persona script, with the learner prompt installed as the
system instruction and the user side replayed from the script. Grading is
either automatic (yes/no judge call per rubric item) or a manual sheet
round-trip, which stays first-class because many app behaviors cannot be
checked reliably by rules.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path

from . import gateway
from .bundles import CheckMode, TaskBundle, TaskKind
from .errors import EmptyCompletion, SheetMismatch, UnresolvedItems
from .gateway import BackendConfig, Message

GENERATION_INSTRUCTION = "Follow this prompt: {user_prompt}"

JUDGE_OUTPUT_SYSTEM = (
    "You check one grading criterion against a generated artifact. "
    'Reply with exactly "yes" if the artifact satisfies the criterion, else "no".'
)
JUDGE_OUTPUT_USER = "CRITERION: {criterion}\nARTIFACT:\n{artifact}"


class Verdict(str, Enum):
    MET = "met"
    NOT_MET = "not_met"
    NEEDS_HUMAN = "needs_human"


class ArtifactMode(str, Enum):
    CODE_SOURCE = "code_source"
    CHAT_TRANSCRIPTS = "chat_transcripts"


@dataclass(frozen=True)
class GenerationParams:
    model: str
    temperature: float
    seed: int | None = None


@dataclass(frozen=True)
class Transcript:
    persona_id: str
    turns: tuple[Message, ...]

    def rendered(self) -> str:
        return "\n".join(f"{m.role}: {m.content}" for m in self.turns)


@dataclass(frozen=True)
class GeneratedArtifact:
    task_id: str
    backend_id: str
    mode: ArtifactMode
    code: str = ""
    transcripts: tuple[Transcript, ...] = ()
    generation_params: GenerationParams = GenerationParams("default", 0.0)

    def __post_init__(self):
        if self.mode is ArtifactMode.CODE_SOURCE and not self.code.strip():
            raise ValueError("code artifacts must carry non-empty source")
        if self.mode is ArtifactMode.CHAT_TRANSCRIPTS and not self.transcripts:
            raise ValueError("transcript artifacts must carry at least one transcript")

    def rendered(self) -> str:
        if self.mode is ArtifactMode.CODE_SOURCE:
            return self.code
        sections = []
        for t in self.transcripts:
            sections.append(f"--- transcript {t.persona_id} ---\n{t.rendered()}")
        return "\n".join(sections)


@dataclass(frozen=True)
class OutputGrade:
    verdicts: tuple[tuple[str, Verdict], ...]  # (rubric id, verdict) in rubric order
    grader_mode: str  # auto_judge | manual_sheet

    @property
    def llm_output_quality(self) -> Fraction | None:
        """#met / #items; withheld while any item still needs a human."""
        if any(v is Verdict.NEEDS_HUMAN for _, v in self.verdicts):
            return None
        met = sum(1 for _, v in self.verdicts if v is Verdict.MET)
        return Fraction(met, len(self.verdicts))

    def to_dict(self) -> dict:
        quality = self.llm_output_quality
        return {
            "verdicts": {rid: v.value for rid, v in self.verdicts},
            "llm_output_quality": None if quality is None else float(quality),
            "grader_mode": self.grader_mode,
        }


def generate_output(prompt: str, bundle: TaskBundle, backend: BackendConfig) -> GeneratedArtifact:
    """Produce the gradeable artifact for a learner prompt.

    Evaluation runs use temperature 0 so outputs are as deterministic as the
    backend allows; the temperature actually used is recorded in
    ``generation_params``.
    """
    params = GenerationParams(model=backend.model_name, temperature=gateway.TEMPERATURE_EVALUATION)
    if bundle.kind is TaskKind.CODE_GAME:
        completion = gateway.complete(
            backend,
            [Message("user", GENERATION_INSTRUCTION.format(user_prompt=prompt))],
            temperature=gateway.TEMPERATURE_EVALUATION,
        )
        if not completion.text.strip():
            raise EmptyCompletion(f"backend {backend.backend_id!r} produced an empty completion")
        return GeneratedArtifact(
            task_id=bundle.id,
            backend_id=backend.backend_id,
            mode=ArtifactMode.CODE_SOURCE,
            code=completion.text,
            generation_params=params,
        )

    transcripts = []
    for script in bundle.persona_scripts:
        turns: list[Message] = [Message("system", prompt)]
        for user_turn in script.turns:
            turns.append(Message("user", user_turn))
            completion = gateway.complete(backend, turns, temperature=gateway.TEMPERATURE_EVALUATION)
            if not completion.text.strip():
                raise EmptyCompletion(
                    f"backend {backend.backend_id!r} produced an empty reply in persona {script.id!r}"
                )
            turns.append(Message("assistant", completion.text))
        transcripts.append(Transcript(persona_id=script.id, turns=tuple(turns[1:])))
    return GeneratedArtifact(
        task_id=bundle.id,
        backend_id=backend.backend_id,
        mode=ArtifactMode.CHAT_TRANSCRIPTS,
        transcripts=tuple(transcripts),
        generation_params=params,
    )


def grade_output(
    artifact: GeneratedArtifact,
    bundle: TaskBundle,
    mode: str = "auto_judge",
    backend: BackendConfig | None = None,
    sheet_path: str | Path | None = None,
) -> OutputGrade:
    """Grade an artifact against the bundle rubric.

    ``auto_judge`` asks the backend one yes/no question per rubric item;
    items flagged manual-only in the rubric come back as needs_human.
    ``manual_sheet`` writes a grading sheet for a human and withholds the
    quality fraction until the sheet is ingested.
    """
    if artifact.task_id != bundle.id:
        raise ValueError(f"artifact belongs to {artifact.task_id!r}, not {bundle.id!r}")
    if mode == "manual_sheet":
        if sheet_path is None:
            raise ValueError("manual_sheet mode needs sheet_path")
        _write_sheet(sheet_path, bundle)
        verdicts = tuple((item.id, Verdict.NEEDS_HUMAN) for item in bundle.rubric)
        return OutputGrade(verdicts=verdicts, grader_mode="manual_sheet")
    if mode != "auto_judge":
        raise ValueError(f"unknown grader mode {mode!r}")
    if backend is None:
        raise ValueError("auto_judge mode needs a backend")

    rendered = artifact.rendered()
    verdicts = []
    for item in bundle.rubric:
        if item.check_mode is CheckMode.MANUAL:
            verdicts.append((item.id, Verdict.NEEDS_HUMAN))
            continue
        completion = gateway.complete(
            backend,
            [
                Message("system", JUDGE_OUTPUT_SYSTEM),
                Message("user", JUDGE_OUTPUT_USER.format(criterion=item.description, artifact=rendered)),
            ],
            temperature=gateway.TEMPERATURE_EVALUATION,
        )
        verdicts.append((item.id, _parse_yes_no(completion.text)))
    return OutputGrade(verdicts=tuple(verdicts), grader_mode="auto_judge")


def _parse_yes_no(text: str) -> Verdict:
    head = text.strip().lower().strip('."\'')
    if head.startswith("yes"):
        return Verdict.MET
    if head.startswith("no"):
        return Verdict.NOT_MET
    return Verdict.NEEDS_HUMAN


SHEET_FIELDS = ["rubric_id", "description", "verdict"]


def _write_sheet(path: str | Path, bundle: TaskBundle) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SHEET_FIELDS)
        for item in bundle.rubric:
            writer.writerow([item.id, item.description, ""])


def ingest_manual_grades(sheet: str | Path, bundle: TaskBundle) -> OutputGrade:
    """Read a filled grading sheet back into a complete OutputGrade."""
    with Path(sheet).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SheetMismatch("sheet is empty; expected a header row") from None
        if header != SHEET_FIELDS:
            raise SheetMismatch(f"unexpected header {header!r}")
        rows = list(reader)

    known = {item.id for item in bundle.rubric}
    marked: dict[str, Verdict] = {}
    for row in rows:
        if len(row) != 3:
            raise SheetMismatch(f"malformed row {row!r}")
        rubric_id, _, verdict_raw = row
        if rubric_id not in known:
            raise SheetMismatch(f"unknown rubric id {rubric_id!r}")
        if rubric_id in marked:
            raise SheetMismatch(f"duplicate rubric id {rubric_id!r}")
        verdict_raw = verdict_raw.strip().lower()
        if verdict_raw == "met":
            marked[rubric_id] = Verdict.MET
        elif verdict_raw == "not_met":
            marked[rubric_id] = Verdict.NOT_MET
        elif not verdict_raw:
            raise UnresolvedItems(f"rubric id {rubric_id!r} left unmarked")
        else:
            raise SheetMismatch(f"verdict must be met or not_met, got {verdict_raw!r}")

    missing = [item.id for item in bundle.rubric if item.id not in marked]
    if missing:
        raise UnresolvedItems(f"sheet does not cover rubric ids: {', '.join(missing)}")
    verdicts = tuple((item.id, marked[item.id]) for item in bundle.rubric)
    return OutputGrade(verdicts=verdicts, grader_mode="manual_sheet")
