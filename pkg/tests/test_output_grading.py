from __future__ import annotations

import csv

import pytest

from ropetrain.errors import EmptyCompletion, SheetMismatch, UnresolvedItems
from ropetrain.gateway import TEMPERATURE_EVALUATION, mock_backend
from ropetrain.mocksim import simulated_backend
from ropetrain.output_grading import (
    ArtifactMode,
    Verdict,
    generate_output,
    grade_output,
    ingest_manual_grades,
)


CANNED_SOURCE = "def game():\n    return 'canned'\n"


def canned_backend():
    return mock_backend(default=CANNED_SOURCE)


def test_generate_code_uses_evaluation_temperature(tictactoe):
    artifact = generate_output("Build tic tac toe.", tictactoe, canned_backend())
    assert artifact.mode is ArtifactMode.CODE_SOURCE
    assert artifact.code == CANNED_SOURCE
    assert artifact.generation_params.temperature == TEMPERATURE_EVALUATION == 0.0
    assert artifact.task_id == "tictactoe"


def test_generate_empty_completion_rejected(tictactoe):
    backend = mock_backend(default="   ")
    with pytest.raises(EmptyCompletion):
        generate_output("Build tic tac toe.", tictactoe, backend)


def test_gpt_app_one_transcript_per_persona(outline):
    backend = mock_backend(default="Sure, here is an outline.")
    artifact = generate_output("You outline things.", outline, backend)
    assert artifact.mode is ArtifactMode.CHAT_TRANSCRIPTS
    assert len(artifact.transcripts) == len(outline.persona_scripts) == 2
    first = artifact.transcripts[0]
    # User side replayed from the script, assistant side generated.
    assert [m.role for m in first.turns] == ["user", "assistant"] * len(
        outline.persona_scripts[0].turns
    )
    assert first.turns[0].content == outline.persona_scripts[0].turns[0]


def test_gpt_app_ten_persona_scripts_yield_ten_transcripts(outline, tmp_path):
    import dataclasses

    from ropetrain.bundles import PersonaScript

    personas = tuple(
        PersonaScript(id=f"p{i}", turns=(f"question {i}",)) for i in range(10)
    )
    ten = dataclasses.replace(outline, persona_scripts=personas)
    artifact = generate_output("You outline things.", ten, mock_backend(default="ok"))
    assert len(artifact.transcripts) == 10


def test_grade_all_met(tictactoe):
    artifact = generate_output("x", tictactoe, canned_backend())
    grade = grade_output(artifact, tictactoe, "auto_judge", backend=mock_backend(default="yes"))
    assert grade.llm_output_quality == 1


def test_grade_none_met(tictactoe):
    artifact = generate_output("x", tictactoe, canned_backend())
    grade = grade_output(artifact, tictactoe, "auto_judge", backend=mock_backend(default="no"))
    assert grade.llm_output_quality == 0


def test_grade_artifact_missing_only_title(tictactoe):
    # Simulated backend: the artifact implements exactly the stated
    # requirements, so dropping the title line costs exactly that rubric item.
    backend = simulated_backend()
    prompt = "\n".join(r.text for r in tictactoe.reference_requirements if r.id != "title")
    artifact = generate_output(prompt, tictactoe, backend)
    grade = grade_output(artifact, tictactoe, "auto_judge", backend=backend)
    verdicts = dict(grade.verdicts)
    assert verdicts["g_title"] is Verdict.NOT_MET
    assert grade.llm_output_quality == pytest.approx(8 / 9)


def test_grade_verdicts_order_independent(tictactoe):
    import dataclasses

    backend = simulated_backend()
    prompt = "\n".join(r.text for r in tictactoe.reference_requirements if r.id != "title")
    artifact = generate_output(prompt, tictactoe, backend)
    shuffled = dataclasses.replace(tictactoe, rubric=tuple(reversed(tictactoe.rubric)))
    straight = dict(grade_output(artifact, tictactoe, "auto_judge", backend=backend).verdicts)
    reversed_ = dict(grade_output(artifact, shuffled, "auto_judge", backend=backend).verdicts)
    assert straight == reversed_


def test_manual_sheet_roundtrip(tictactoe, tmp_path):
    artifact = generate_output("x", tictactoe, canned_backend())
    sheet = tmp_path / "sheet.csv"
    pending = grade_output(artifact, tictactoe, "manual_sheet", sheet_path=sheet)
    assert pending.llm_output_quality is None
    assert all(v is Verdict.NEEDS_HUMAN for _, v in pending.verdicts)

    with sheet.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["rubric_id", "description", "verdict"]
    assert len(rows) == 1 + len(tictactoe.rubric)

    filled = [rows[0]] + [[r[0], r[1], "met" if i != 0 else "not_met"] for i, r in enumerate(rows[1:])]
    with sheet.open("w", newline="") as fh:
        csv.writer(fh).writerows(filled)
    grade = ingest_manual_grades(sheet, tictactoe)
    assert grade.llm_output_quality == pytest.approx(8 / 9)


def test_ingest_missing_row_unresolved(tictactoe, tmp_path):
    sheet = tmp_path / "sheet.csv"
    rows = [["rubric_id", "description", "verdict"]]
    rows += [[item.id, item.description, "met"] for item in tictactoe.rubric[:-1]]
    with sheet.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(UnresolvedItems):
        ingest_manual_grades(sheet, tictactoe)


def test_ingest_blank_verdict_unresolved(tictactoe, tmp_path):
    sheet = tmp_path / "sheet.csv"
    rows = [["rubric_id", "description", "verdict"]]
    rows += [[item.id, item.description, ""] for item in tictactoe.rubric]
    with sheet.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(UnresolvedItems):
        ingest_manual_grades(sheet, tictactoe)


def test_ingest_unknown_rubric_id_mismatch(tictactoe, tmp_path):
    sheet = tmp_path / "sheet.csv"
    rows = [["rubric_id", "description", "verdict"]]
    rows += [[item.id, item.description, "met"] for item in tictactoe.rubric]
    rows.append(["g_ghost", "not in the bundle", "met"])
    with sheet.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(SheetMismatch):
        ingest_manual_grades(sheet, tictactoe)


def test_artifact_must_belong_to_bundle(tictactoe, tetris):
    artifact = generate_output("x", tetris, canned_backend())
    with pytest.raises(ValueError):
        grade_output(artifact, tictactoe, "manual_sheet", sheet_path="unused.csv")
