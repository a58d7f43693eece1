from __future__ import annotations

import itertools
import json

import pytest

from ropetrain.cli import main
from ropetrain.mocksim import simulated_backend
from ropetrain.sessions import SessionManager


def test_tasks_lists_builtin_bundles(capsys):
    assert main(["tasks"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in out] == ["outline_assistant", "tetris", "tictactoe"]


def test_grade_deterministic_known_fractions(tmp_path, capsys, tictactoe):
    prompt = tmp_path / "prompt.txt"
    prompt.write_text(
        "\n".join(r.text for r in tictactoe.reference_requirements if r.id != "title"),
        encoding="utf-8",
    )
    code = main(["grade", str(prompt), "--task", "tictactoe", "--matcher", "deterministic"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["requirement_quality"] == pytest.approx(8 / 9)
    assert payload["llm_output_quality"] == pytest.approx(8 / 9)
    assert payload["overall"] == pytest.approx(8 / 9)
    assert payload["omission_count"] == 1


def test_grade_missing_task_exit_2(tmp_path, capsys):
    prompt = tmp_path / "p.txt"
    prompt.write_text("x", encoding="utf-8")
    code = main(["grade", str(prompt), "--task", "ghost_task"])
    assert code == 2
    assert "ghost_task" in capsys.readouterr().err


def test_grade_sheet_mode_withholds_output_quality(tmp_path, capsys):
    prompt = tmp_path / "p.txt"
    prompt.write_text("Render the title Tic-Tac-Toe on top of the board.", encoding="utf-8")
    sheet = tmp_path / "sheet.csv"
    code = main(
        ["grade", str(prompt), "--task", "tictactoe", "--output-grade", "sheet", "--sheet", str(sheet)]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["llm_output_quality"] is None
    assert payload["overall"] is None
    assert sheet.is_file()
    assert sheet.read_text().splitlines()[0] == "rubric_id,description,verdict"


def test_grade_csv_format(tmp_path, capsys):
    prompt = tmp_path / "p.txt"
    prompt.write_text("Render the title Tic-Tac-Toe on top of the board.", encoding="utf-8")
    code = main(["grade", str(prompt), "--task", "tictactoe", "--format", "csv"])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("task_id,backend,matcher")
    assert out[1].startswith("tictactoe,mock,deterministic")


def test_experiment_deterministic_report(tmp_path, capsys, tictactoe):
    prompts = {
        "p1_pre.txt": "\n".join(r.text for r in tictactoe.reference_requirements[:2]),
        "p1_post.txt": "\n".join(r.text for r in tictactoe.reference_requirements[:8]),
    }
    for name, text in prompts.items():
        (tmp_path / name).write_text(text, encoding="utf-8")
    corpus = tmp_path / "corpus.csv"
    corpus.write_text(
        "participant_id,phase,task_id,variant,prompt_path\n"
        "p1,pre,tictactoe,original,p1_pre.txt\n"
        "p1,post,tictactoe,original,p1_post.txt\n",
        encoding="utf-8",
    )
    out_dir = tmp_path / "report"
    code = main(["experiment", str(corpus), "--out", str(out_dir)])
    assert code == 0
    results = (out_dir / "results.csv").read_text().splitlines()
    assert len(results) == 3
    assert (out_dir / "correlations.csv").is_file()
    report = (out_dir / "report.md").read_text()
    assert "| mock | all | original | 1 |" in report
    # Deterministic: a second run writes identical bytes.
    out_dir2 = tmp_path / "report2"
    assert main(["experiment", str(corpus), "--out", str(out_dir2)]) == 0
    assert (out_dir2 / "results.csv").read_text() == (out_dir / "results.csv").read_text()
    assert (out_dir2 / "report.md").read_text() == report


def test_experiment_optimize_doubles_variants(tmp_path):
    (tmp_path / "p.txt").write_text("Render the board.", encoding="utf-8")
    corpus = tmp_path / "corpus.csv"
    corpus.write_text(
        "participant_id,phase,task_id,variant,prompt_path\n"
        "p1,pre,tictactoe,original,p.txt\n",
        encoding="utf-8",
    )
    template = tmp_path / "opt.txt"
    template.write_text("{user_prompt}", encoding="utf-8")
    out_dir = tmp_path / "rep"
    assert main(["experiment", str(corpus), "--optimize", str(template), "--out", str(out_dir)]) == 0
    rows = (out_dir / "results.csv").read_text().splitlines()[1:]
    variants = sorted(row.split(",")[4] for row in rows)
    assert variants == ["optimized", "original"]


def test_experiment_unreadable_corpus_exit_2(tmp_path, capsys):
    assert main(["experiment", str(tmp_path / "missing.csv")]) == 2


def test_audit_command(tmp_path, capsys, registry):
    ticker = itertools.count(1)
    manager = SessionManager(
        registry,
        simulated_backend(),
        storage_root=tmp_path / "s",
        clock=lambda: float(next(ticker)),
        id_factory=lambda: "cli-audit",
    )
    state = manager.start_session("tictactoe")
    manager.post_turn(state.session_id, ["Render the title Tic-Tac-Toe on top of the board."])
    log = manager.log_path(state.session_id)
    annotations = tmp_path / "ann.csv"
    annotations.write_text(
        "turn_index,kind,needed,provided,correct\n2,chat_hint,true,true,true\n",
        encoding="utf-8",
    )
    assert main(["audit", str(log), str(annotations)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("feedback_source")
    assert out[1].startswith("chat_hint,100.00")


def test_audit_unknown_turn_exit_1(tmp_path, capsys, registry):
    manager = SessionManager(
        registry, simulated_backend(), storage_root=tmp_path / "s2",
        id_factory=lambda: "cli-audit2",
    )
    state = manager.start_session("tictactoe")
    log = manager.log_path(state.session_id)
    annotations = tmp_path / "ann.csv"
    annotations.write_text(
        "turn_index,kind,needed,provided,correct\n42,chat_hint,true,true,true\n",
        encoding="utf-8",
    )
    assert main(["audit", str(log), str(annotations)]) == 1


def test_serve_reports_startup_failure(monkeypatch, capsys):
    import uvicorn

    def boom(*args, **kwargs):
        raise OSError("address already in use")

    monkeypatch.setattr(uvicorn, "run", boom)
    assert main(["serve", "--port", "1"]) == 1
    assert "address already in use" in capsys.readouterr().err
