"""A deterministic stand-in backend for offline runs.

The simulator recognizes the package's own instruction templates and
answers them rule-based: generated artifacts echo exactly the requirements
stated in the prompt, rubric judgments check token overlap between the
criterion and the artifact, hints come back canned, and counterfactual
edits return the reference source tagged with the defect. Everything is a
pure function of the request, so whole sessions and experiments replay
byte-identically.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from . import textnorm
from .gateway import BackendConfig, Message, mock_backend
from .output_grading import GENERATION_INSTRUCTION, JUDGE_OUTPUT_SYSTEM

_GENERATION_PREFIX = GENERATION_INSTRUCTION.split("{", 1)[0]  # "Follow this prompt: "

# Criterion counts as implemented when some artifact line overlaps it this much.
_JUDGE_OVERLAP = 0.5

_SAFE_HINT = (
    "Walk through the app once more: is every behavior you saw written down, "
    "and does each stated detail match what the app actually does?"
)


def simulate(messages: Sequence[Message]) -> str | None:
    system = messages[0].content if messages and messages[0].role == "system" else ""
    last = messages[-1].content if messages else ""

    if system == JUDGE_OUTPUT_SYSTEM:
        return _judge(last)
    if system.startswith("You edit a reference program"):
        return _counterfactual(last)
    if system.startswith("You are a requirements tutor"):
        return _SAFE_HINT
    if last.startswith(_GENERATION_PREFIX):
        return last[len(_GENERATION_PREFIX) :]
    if system and messages[-1].role == "user":
        # Persona-driven app chat: behave as an app that exhibits exactly its
        # instructions by restating them.
        return system
    return last


def _judge(request: str) -> str:
    criterion, _, artifact = request.partition("\nARTIFACT:\n")
    criterion = criterion.removeprefix("CRITERION: ")
    wanted = set(textnorm.content_tokens(criterion))
    for line in artifact.splitlines():
        if textnorm.jaccard(set(textnorm.content_tokens(line)), wanted) >= _JUDGE_OVERLAP:
            return "yes"
    return "no"


def _counterfactual(request: str) -> str:
    body, _, defect = request.partition("\n\nDEFECT: ")
    source = body.removeprefix("REFERENCE PROGRAM:\n")
    first_defect_line = defect.splitlines()[0] if defect else "stated defect"
    return f"{source}\n# variant exhibiting: {first_defect_line}"


def simulated_backend(backend_id: str = "mock", model_name: str = "sim") -> BackendConfig:
    """Mock backend config wired to the simulator."""
    return replace(mock_backend(backend_id=backend_id, handler=simulate), model_name=model_name)
