"""Loading and validation of on-disk task bundles.

A bundle is a directory:

    task.json            id, kind, title, brief, llm_hard, requirements[],
                         rubric[], examples[], keywords[]
    reference/artifact.txt   reference prompt (gpt_app)
    reference/artifact.py    reference program source (code_game)
    examples/*.txt           transcript payloads
    personas/*.json          scripted user-turn sequences (gpt_app)

Field names are documented in docs/bundle_schema.md. Validation is eager:
a loaded bundle is immutable and never re-checked.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import DanglingReference, MissingFile, RootUnreadable, SchemaViolation


class TaskKind(str, Enum):
    GPT_APP = "gpt_app"
    CODE_GAME = "code_game"


class RequirementLevel(str, Enum):
    MILESTONE = "milestone"
    DETAIL = "detail"


class ExampleModality(str, Enum):
    TRANSCRIPT = "transcript"
    VISUAL_DEMO = "visual_demo"


class CheckMode(str, Enum):
    AUTO_JUDGE = "auto_judge"
    MANUAL = "manual"


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    level: RequirementLevel = RequirementLevel.DETAIL
    category: str = "behavior"
    parent: str | None = None
    # Tokens that must appear in a matched clause for it to count as fully
    # specified; a match lacking one is graded ambiguous.
    qualifiers: tuple[str, ...] = ()
    # Example id of a static illustrative transcript shown when this
    # requirement is mis-stated (gpt_app counterfactual channel).
    illustration_example_id: str | None = None


@dataclass(frozen=True)
class Example:
    id: str
    modality: ExampleModality
    payload: str


@dataclass(frozen=True)
class RubricItem:
    id: str
    description: str
    requirement_ids: tuple[str, ...]
    check_mode: CheckMode = CheckMode.AUTO_JUDGE


@dataclass(frozen=True)
class PersonaScript:
    id: str
    turns: tuple[str, ...]


@dataclass(frozen=True)
class TaskBundle:
    id: str
    kind: TaskKind
    title: str
    brief: str
    llm_hard: bool
    reference_requirements: tuple[Requirement, ...]
    rubric: tuple[RubricItem, ...]
    interaction_examples: tuple[Example, ...] = ()
    persona_scripts: tuple[PersonaScript, ...] = ()
    reference_artifact: str = ""
    keywords: tuple[str, ...] = ()

    def requirement(self, req_id: str) -> Requirement:
        for req in self.reference_requirements:
            if req.id == req_id:
                return req
        raise KeyError(req_id)

    @property
    def requirement_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.reference_requirements)

    def example(self, example_id: str) -> Example | None:
        for ex in self.interaction_examples:
            if ex.id == example_id:
                return ex
        return None


def load_bundle(path: str | Path) -> TaskBundle:
    """Load and fully validate one bundle directory."""
    root = Path(path)
    task_file = root / "task.json"
    if not task_file.is_file():
        raise MissingFile(f"{task_file} not found")
    try:
        raw = json.loads(task_file.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SchemaViolation("task.json", f"unparseable: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaViolation("task.json", "top level must be an object")

    bundle_id = _string(raw, "id")
    kind = _enum(raw, "kind", TaskKind)
    title = _string(raw, "title")
    brief = _string(raw, "brief")
    llm_hard = raw.get("llm_hard", False)
    if not isinstance(llm_hard, bool):
        raise SchemaViolation("llm_hard", "must be a boolean")

    requirements = _parse_requirements(raw)
    rubric = _parse_rubric(raw, {r.id for r in requirements})
    examples = _parse_examples(raw, root)
    example_ids = {e.id for e in examples}
    for req in requirements:
        if req.illustration_example_id and req.illustration_example_id not in example_ids:
            raise DanglingReference(
                f"requirements[{req.id}].illustration_example_id -> "
                f"{req.illustration_example_id} does not resolve"
            )

    keywords = raw.get("keywords", [])
    if not isinstance(keywords, list) or any(not isinstance(k, str) for k in keywords):
        raise SchemaViolation("keywords", "must be a list of strings")

    personas = _load_personas(root)
    if kind is TaskKind.GPT_APP and not personas:
        raise SchemaViolation("personas", "gpt_app bundles need at least one persona script")

    artifact = _load_reference_artifact(root)
    if kind is TaskKind.CODE_GAME and not artifact.strip():
        raise SchemaViolation("reference", "code_game bundles need a non-empty reference artifact")

    return TaskBundle(
        id=bundle_id,
        kind=kind,
        title=title,
        brief=brief,
        llm_hard=llm_hard,
        reference_requirements=requirements,
        rubric=rubric,
        interaction_examples=examples,
        persona_scripts=personas,
        reference_artifact=artifact,
        keywords=tuple(keywords),
    )


def list_bundles(
    root: str | Path,
    on_error: Callable[[str, Exception], None] | None = None,
) -> list[tuple[str, TaskKind, str]]:
    """Enumerate valid bundles under ``root``, sorted by id.

    Invalid bundle directories are reported through ``on_error`` (directory
    name, exception) and omitted from the result.
    """
    root = Path(root)
    if not root.is_dir():
        raise RootUnreadable(f"{root} is not a readable directory")
    entries: list[tuple[str, TaskKind, str]] = []
    for child in sorted(root.iterdir()):
        if not child.is_dir() or not (child / "task.json").is_file():
            continue
        try:
            bundle = load_bundle(child)
        except Exception as exc:  # noqa: BLE001 - diagnostics channel
            if on_error is not None:
                on_error(child.name, exc)
            continue
        entries.append((bundle.id, bundle.kind, bundle.title))
    entries.sort(key=lambda e: e[0])
    return entries


class TaskRegistry:
    """Cache of loaded bundles under a root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._cache: dict[str, TaskBundle] = {}

    def list(self) -> list[tuple[str, TaskKind, str]]:
        return list_bundles(self.root)

    def get(self, task_id: str) -> TaskBundle:
        if task_id not in self._cache:
            bundle_dir = self.root / task_id
            if not bundle_dir.is_dir():
                raise MissingFile(f"no bundle directory for task {task_id!r}")
            bundle = load_bundle(bundle_dir)
            if bundle.id != task_id:
                raise SchemaViolation("id", f"bundle id {bundle.id!r} does not match directory {task_id!r}")
            self._cache[task_id] = bundle
        return self._cache[task_id]


def builtin_bundle_root() -> Path:
    """Root of the bundles shipped with the package."""
    return Path(__file__).parent / "data" / "bundles"


# --- parsing helpers --------------------------------------------------------

def _string(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value.strip():
        raise SchemaViolation(key, "must be a non-empty string")
    return value


def _enum(obj: dict, key: str, enum_cls):
    value = obj.get(key)
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise SchemaViolation(key, f"must be one of: {allowed}") from None


def _parse_requirements(raw: dict) -> tuple[Requirement, ...]:
    items = raw.get("requirements")
    if not isinstance(items, list) or not items:
        raise SchemaViolation("requirements", "must be a non-empty list")
    out: list[Requirement] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        label = f"requirements[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(label, "must be an object")
        req_id = _string(item, "id")
        if req_id in seen:
            raise SchemaViolation(f"{label}.id", f"duplicate requirement id {req_id!r}")
        seen.add(req_id)
        text = _string(item, "text")
        level = _enum(item, "level", RequirementLevel) if "level" in item else RequirementLevel.DETAIL
        qualifiers = item.get("qualifiers", [])
        if not isinstance(qualifiers, list) or any(not isinstance(q, str) for q in qualifiers):
            raise SchemaViolation(f"{label}.qualifiers", "must be a list of strings")
        out.append(
            Requirement(
                id=req_id,
                text=text,
                level=level,
                category=item.get("category", "behavior"),
                parent=item.get("parent"),
                qualifiers=tuple(qualifiers),
                illustration_example_id=item.get("illustration_example_id"),
            )
        )
    by_id = {r.id for r in out}
    for req in out:
        if req.parent is not None and req.parent not in by_id:
            raise DanglingReference(f"requirements[{req.id}].parent -> {req.parent} does not resolve")
    return tuple(out)


def _parse_rubric(raw: dict, requirement_ids: set[str]) -> tuple[RubricItem, ...]:
    items = raw.get("rubric")
    if not isinstance(items, list) or not items:
        raise SchemaViolation("rubric", "must be a non-empty list")
    out: list[RubricItem] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        label = f"rubric[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(label, "must be an object")
        rubric_id = _string(item, "id")
        if rubric_id in seen:
            raise SchemaViolation(f"{label}.id", f"duplicate rubric id {rubric_id!r}")
        seen.add(rubric_id)
        req_ids = item.get("requirement_ids")
        if not isinstance(req_ids, list) or not req_ids:
            raise SchemaViolation(f"{label}.requirement_ids", "must name at least one requirement")
        for rid in req_ids:
            if rid not in requirement_ids:
                raise DanglingReference(f"rubric[{rubric_id}] -> requirement {rid!r} does not resolve")
        mode = _enum(item, "check_mode", CheckMode) if "check_mode" in item else CheckMode.AUTO_JUDGE
        out.append(
            RubricItem(
                id=rubric_id,
                description=_string(item, "description"),
                requirement_ids=tuple(req_ids),
                check_mode=mode,
            )
        )
    return tuple(out)


def _parse_examples(raw: dict, root: Path) -> tuple[Example, ...]:
    items = raw.get("examples", [])
    if not isinstance(items, list):
        raise SchemaViolation("examples", "must be a list")
    out: list[Example] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        label = f"examples[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(label, "must be an object")
        ex_id = _string(item, "id")
        if ex_id in seen:
            raise SchemaViolation(f"{label}.id", f"duplicate example id {ex_id!r}")
        seen.add(ex_id)
        modality = _enum(item, "modality", ExampleModality)
        if modality is ExampleModality.TRANSCRIPT:
            file_name = _string(item, "file")
            payload_path = root / "examples" / file_name
            if not payload_path.is_file():
                raise MissingFile(f"{payload_path} not found")
            payload = payload_path.read_text(encoding="utf-8")
            if not payload.strip():
                raise SchemaViolation(f"{label}.file", "transcript payload must be non-empty")
        else:
            payload = _string(item, "demo_ref")
        out.append(Example(id=ex_id, modality=modality, payload=payload))
    return tuple(out)


def _load_personas(root: Path) -> tuple[PersonaScript, ...]:
    persona_dir = root / "personas"
    if not persona_dir.is_dir():
        return ()
    scripts: list[PersonaScript] = []
    for path in sorted(persona_dir.glob("*.json")):
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise SchemaViolation(f"personas/{path.name}", f"unparseable: {exc}") from exc
        if not isinstance(raw, dict):
            raise SchemaViolation(f"personas/{path.name}", "must be an object")
        turns = raw.get("turns")
        if not isinstance(turns, list) or not turns or any(not isinstance(t, str) for t in turns):
            raise SchemaViolation(f"personas/{path.name}.turns", "must be a non-empty list of strings")
        scripts.append(PersonaScript(id=raw.get("id", path.stem), turns=tuple(turns)))
    return tuple(scripts)


def _load_reference_artifact(root: Path) -> str:
    ref_dir = root / "reference"
    if ref_dir.is_dir():
        for candidate in sorted(ref_dir.iterdir()):
            if candidate.is_file() and candidate.name.startswith("artifact."):
                return candidate.read_text(encoding="utf-8")
    raise MissingFile(f"{ref_dir}/artifact.* not found")
