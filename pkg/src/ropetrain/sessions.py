"""Training-session state machine, turn processing, persistence, replay.

One append-only JSONL log per session doubles as research data and as the
source of truth for crash recovery: every turn is flushed to disk before it
is acknowledged to the caller. Under the deterministic matcher and a
cassette or mock backend, replaying a log reconstructs the exact final
state of the live session.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
import time
import uuid
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import feedback as fb
from . import grading
from .bundles import TaskBundle, TaskRegistry
from .errors import CorruptLog, MissingFile, SessionEnded, UnknownSession, UnknownTask
from .gateway import BackendConfig
from .grading import Matcher, RequirementAssessment

GREETING_TEMPLATE = (
    "Welcome to {title}. {brief} Describe the app's requirements as accurately "
    "and completely as you can; requirements you get right are revealed as "
    "reference cards."
)
CONGRATULATION = "Every reference requirement is covered. Well done!"


@dataclass(frozen=True)
class TurnRecord:
    index: int
    role: str  # learner | system
    payload: dict
    ts: float

    def to_dict(self) -> dict:
        return {"index": self.index, "role": self.role, "payload": self.payload, "ts": self.ts}


@dataclass
class SessionState:
    session_id: str
    task_id: str
    status: str = "active"  # active | ended
    turns: list[TurnRecord] = field(default_factory=list)
    working_doc: tuple[str, ...] = ()
    revealed: frozenset[str] = frozenset()
    latest_assessment: RequirementAssessment | None = None

    def to_dict(self, bundle: TaskBundle | None = None) -> dict:
        revealed = sorted(self.revealed)
        if bundle is not None:
            order = {rid: i for i, rid in enumerate(bundle.requirement_ids)}
            revealed = sorted(self.revealed, key=lambda rid: order.get(rid, len(order)))
        return {
            "session_id": self.session_id,
            "task_id": self.task_id,
            "status": self.status,
            "turns": [t.to_dict() for t in self.turns],
            "working_doc": list(self.working_doc),
            "revealed": revealed,
            "latest_assessment": None if self.latest_assessment is None else self.latest_assessment.to_dict(),
            "keywords": list(bundle.keywords) if bundle is not None else [],
        }


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    task_id: str
    turn_count: int
    requirement_quality: Fraction
    final_assessment: RequirementAssessment
    feedback_counts: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "task_id": self.task_id,
            "turn_count": self.turn_count,
            "requirement_quality": float(self.requirement_quality),
            "final_assessment": self.final_assessment.to_dict(),
            "feedback_counts": dict(self.feedback_counts),
        }


class SessionManager:
    """Owns all live sessions. Turns within a session are strictly
    serialized; distinct sessions run concurrently."""

    def __init__(
        self,
        registry: TaskRegistry,
        backend: BackendConfig,
        matcher: Matcher = grading.DETERMINISTIC,
        storage_root: str | Path = "sessions",
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] | None = None,
    ):
        self.registry = registry
        self.backend = backend
        self.matcher = matcher
        self.storage_root = Path(storage_root)
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex)
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def start_session(self, task_id: str) -> SessionState:
        try:
            bundle = self.registry.get(task_id)
        except MissingFile as exc:
            raise UnknownTask(f"no task with id {task_id!r}") from exc
        session_id = self.id_factory()
        state = SessionState(session_id=session_id, task_id=task_id)
        greeting = GREETING_TEMPLATE.format(title=bundle.title, brief=bundle.brief)
        turn = TurnRecord(index=0, role="system", payload={"message": greeting, "events": []}, ts=self.clock())
        state.turns.append(turn)
        with self._registry_lock:
            self._sessions[session_id] = state
            self._locks[session_id] = threading.Lock()
        self._append_log(
            state,
            turn_index=0,
            role="system",
            kind="session_start",
            payload={"task_id": task_id, "message": greeting},
            ts=turn.ts,
        )
        return state

    def get_session(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise UnknownSession(f"no session with id {session_id!r}")
        return state

    def post_turn(self, session_id: str, document: list[str]) -> tuple[list[fb.FeedbackEvent], SessionState]:
        state = self.get_session(session_id)
        with self._locks[session_id]:
            if state.status != "active":
                raise SessionEnded(f"session {session_id!r} already ended")
            bundle = self.registry.get(state.task_id)

            learner_index = len(state.turns)
            learner_ts = self.clock()
            state.turns.append(
                TurnRecord(index=learner_index, role="learner", payload={"document": list(document)}, ts=learner_ts)
            )
            state.working_doc = tuple(document)

            system_index = learner_index + 1
            events, assessment, revealed = self._respond(bundle, state, system_index)
            system_ts = self.clock()
            state.turns.append(
                TurnRecord(
                    index=system_index,
                    role="system",
                    payload=_system_payload(events, assessment),
                    ts=system_ts,
                )
            )
            state.revealed = revealed
            state.latest_assessment = assessment

            self._append_log(
                state,
                turn_index=learner_index,
                role="learner",
                kind="learner_turn",
                payload={"document": list(document)},
                ts=learner_ts,
            )
            self._append_log(
                state,
                turn_index=system_index,
                role="system",
                kind="system_turn",
                payload=_system_payload(events, assessment),
                ts=system_ts,
            )
            return events, state

    def end_session(self, session_id: str) -> SessionReport:
        state = self.get_session(session_id)
        with self._locks[session_id]:
            if state.status != "active":
                raise SessionEnded(f"session {session_id!r} already ended")
            bundle = self.registry.get(state.task_id)
            assessment = state.latest_assessment
            if assessment is None:
                extracted = grading.extract_requirements("\n".join(state.working_doc), self.matcher)
                assessment = grading.classify_defects(extracted, bundle.reference_requirements, self.matcher)
            report = SessionReport(
                session_id=session_id,
                task_id=state.task_id,
                turn_count=len(state.turns),
                requirement_quality=grading.requirement_quality(assessment),
                final_assessment=assessment,
                feedback_counts=_feedback_counts(state),
            )
            state.status = "ended"
            self._append_log(
                state,
                turn_index=len(state.turns),
                role="system",
                kind="session_end",
                payload={"report": report.to_dict()},
                ts=self.clock(),
            )
            return report

    # -- feedback pipeline -------------------------------------------------

    def _respond(
        self, bundle: TaskBundle, state: SessionState, turn_index: int
    ) -> tuple[list[fb.FeedbackEvent], RequirementAssessment, frozenset[str]]:
        prompt_text = "\n".join(state.working_doc)
        extracted = grading.extract_requirements(prompt_text, self.matcher)
        assessment = grading.classify_defects(extracted, bundle.reference_requirements, self.matcher)

        events = fb.maybe_reveal(assessment, state.revealed, bundle, turn_index)
        revealed = state.revealed | {e.target for e in events}

        defect = fb.select_defect(assessment)
        if defect is not None:
            verdict = assessment.verdict_for(defect[0])
            evidence_text = verdict.evidence.text if verdict.evidence else None
            context = fb.SessionContext(
                revealed=revealed,
                working_doc=state.working_doc,
                turn_index=turn_index,
                evidence_text=evidence_text,
            )
            events.append(fb.make_chat_hint(defect, bundle, context, self.backend))
            if defect[1] in fb.COUNTERFACTUAL_KINDS:
                counterfactual = fb.make_counterfactual(
                    defect,
                    bundle,
                    self.backend,
                    self.artifact_store(state.session_id),
                    turn_index,
                    evidence_text=evidence_text,
                )
                if counterfactual is not None:
                    events.append(counterfactual)
        return events, assessment, revealed

    # -- persistence ---------------------------------------------------------

    def session_dir(self, session_id: str) -> Path:
        return self.storage_root / session_id

    def log_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "log.jsonl"

    def artifact_store(self, session_id: str) -> fb.ArtifactStore:
        return fb.ArtifactStore(self.session_dir(session_id) / "artifacts")

    def find_artifact(self, digest: str) -> str:
        """Look a counterfactual artifact up by content hash across sessions."""
        for session_id in list(self._sessions):
            try:
                return self.artifact_store(session_id).get(digest)
            except KeyError:
                continue
        raise KeyError(digest)

    def _append_log(self, state: SessionState, **entry) -> None:
        path = self.log_path(state.session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        ts = entry.pop("ts")
        record = {
            "ts": ts,
            "session_id": state.session_id,
            "turn_index": entry["turn_index"],
            "role": entry["role"],
            "kind": entry["kind"],
            "payload": entry["payload"],
        }
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def _system_payload(events: list[fb.FeedbackEvent], assessment: RequirementAssessment) -> dict:
    payload = {"events": [e.to_dict() for e in events]}
    if not any(v.defect is not None for v in assessment.verdicts):
        payload["message"] = CONGRATULATION
    return payload


def _feedback_counts(state: SessionState) -> tuple[tuple[str, int], ...]:
    counts = {kind.value: 0 for kind in fb.FeedbackKind}
    for turn in state.turns:
        for raw in turn.payload.get("events", []):
            counts[raw["kind"]] += 1
    return tuple(counts.items())


# --- replay ------------------------------------------------------------------

def replay(
    log: str | Path,
    registry: TaskRegistry,
    backend: BackendConfig,
    matcher: Matcher = grading.DETERMINISTIC,
) -> SessionState:
    """Rebuild a session's final state from its log.

    Learner documents are taken from the log; system responses are recomputed
    through the live pipeline, so with the deterministic matcher and a
    replayable backend the result equals the recorded live state turn for
    turn. Raises CorruptLog with the first bad line number.
    """
    entries = _parse_log(Path(log))
    start = entries[0]
    task_id = start["payload"]["task_id"]
    manager = SessionManager(
        registry,
        backend,
        matcher,
        storage_root=tempfile.mkdtemp(prefix="ropetrain_replay_"),
        id_factory=lambda: start["session_id"],
    )
    # Recompute without writing a second log.
    manager._append_log = lambda *args, **kwargs: None  # type: ignore[assignment]

    state = manager.start_session(task_id)
    state.turns[0] = TurnRecord(
        index=0, role="system", payload=state.turns[0].payload, ts=start["ts"]
    )

    i = 1
    while i < len(entries):
        entry = entries[i]
        if entry["kind"] == "session_end":
            if i != len(entries) - 1:
                raise CorruptLog(entry["line"] + 1, "events after session_end")
            manager.clock = lambda ts=entry["ts"]: ts
            manager.end_session(state.session_id)
            i += 1
            continue
        if entry["kind"] != "learner_turn":
            raise CorruptLog(entry["line"], f"expected learner_turn, got {entry['kind']}")
        if i + 1 >= len(entries):
            raise CorruptLog(entry["line"] + 1, "log ends mid-turn: learner turn without system response")
        response = entries[i + 1]
        if response["kind"] != "system_turn":
            raise CorruptLog(response["line"], f"expected system_turn, got {response['kind']}")
        ts_pair = iter([entry["ts"], response["ts"]])
        manager.clock = lambda pair=ts_pair: next(pair)
        manager.post_turn(state.session_id, entry["payload"]["document"])
        i += 2
    return state


_REQUIRED_FIELDS = ("ts", "session_id", "turn_index", "role", "kind", "payload")


def _parse_log(path: Path) -> list[dict]:
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorruptLog(1, f"unreadable log: {exc}") from exc
    entries: list[dict] = []
    for line_no, line in enumerate(raw_lines, 1):
        if not line.strip():
            raise CorruptLog(line_no, "blank line")
        try:
            entry = json.loads(line)
        except ValueError as exc:
            raise CorruptLog(line_no, f"invalid JSON: {exc}") from exc
        if not isinstance(entry, dict) or any(k not in entry for k in _REQUIRED_FIELDS):
            raise CorruptLog(line_no, "missing required fields")
        entry["line"] = line_no
        entries.append(entry)
    if not entries:
        raise CorruptLog(1, "empty log")
    if entries[0]["kind"] != "session_start":
        raise CorruptLog(1, "log must begin with session_start")
    return entries
