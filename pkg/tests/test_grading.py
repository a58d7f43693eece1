from __future__ import annotations

import json
import random
from fractions import Fraction
from pathlib import Path

import pytest

from ropetrain.bundles import Requirement
from ropetrain.errors import JudgeUnavailable, OutOfRange
from ropetrain.gateway import mock_backend
from ropetrain.grading import (
    DETERMINISTIC,
    COMMISSION_KINDS,
    DefectKind,
    ExtractedRequirement,
    Matcher,
    ReferenceVerdict,
    RequirementAssessment,
    assessment_from_dict,
    classify_defects,
    count_defects,
    extract_requirements,
    overall_score,
    requirement_quality,
    score_report,
)

DATA = Path(__file__).parent / "data"


# --- extraction -----------------------------------------------------------

def test_extract_empty_prompt():
    assert extract_requirements("") == ()


def test_extract_two_sentences_with_spans():
    prompt = "Render the board. Keypress 'r' restarts."
    clauses = extract_requirements(prompt)
    assert [c.text for c in clauses] == ["Render the board.", "Keypress 'r' restarts."]
    assert [c.source_span for c in clauses] == [(0, 17), (18, 40)]
    for clause in clauses:
        assert prompt[clause.source_span[0] : clause.source_span[1]] == clause.text


# Hand annotation of the informal trip-advisor prompt fixture: one clause per
# sentence or list item, frozen here once.
TRIPADVISOR_CLAUSES = [
    "You are a trip advisor.",
    "Help me plan trips.",
    "Ask me questions first: where I go, budget, dates.",
    "start the response with a tl;dr",
    "give 3 options per day",
    "reply in the same language as the user",
    "If I ask for food, only recommend local places.",
    "Thanks!",
]


def test_extract_human_prompt_fixture_matches_hand_annotation():
    prompt = (DATA / "human_prompt_tripadvisor.txt").read_text(encoding="utf-8")
    clauses = extract_requirements(prompt)
    assert [c.text for c in clauses] == TRIPADVISOR_CLAUSES
    spans = [c.source_span for c in clauses]
    assert spans == sorted(spans)
    for (_, end), (start, _) in zip(spans, spans[1:]):
        assert start >= end  # non-overlapping and ordered


def test_extraction_is_deterministic():
    prompt = (DATA / "human_prompt_tripadvisor.txt").read_text(encoding="utf-8")
    first = extract_requirements(prompt)
    second = extract_requirements(prompt)
    assert first == second


# --- classification --------------------------------------------------------

def full_coverage_prompt(bundle) -> str:
    return "\n".join(r.text for r in bundle.reference_requirements)


def test_identity_coverage_all_correct(tictactoe):
    clauses = extract_requirements(full_coverage_prompt(tictactoe))
    assessment = classify_defects(clauses, tictactoe.reference_requirements)
    assert all(v.correct for v in assessment.verdicts)
    assert assessment.extraneous == ()


def test_swapped_board_dims_commission_incorrect(tetris):
    clauses = extract_requirements("Render the game board (6 rows by 8 columns).")
    assessment = classify_defects(clauses, tetris.reference_requirements)
    verdict = assessment.verdict_for("board_size")
    assert verdict.defect is DefectKind.COMMISSION_INCORRECT
    assert verdict.evidence is not None


def test_missing_title_is_omission(tictactoe):
    prompt = "\n".join(r.text for r in tictactoe.reference_requirements if r.id != "title")
    assessment = classify_defects(extract_requirements(prompt), tictactoe.reference_requirements)
    assert assessment.verdict_for("title").defect is DefectKind.OMISSION
    assert assessment.verdict_for("title").evidence is None
    others = [v for v in assessment.verdicts if v.requirement_id != "title"]
    assert all(v.correct for v in others)


def test_vague_movement_is_ambiguous(tetris):
    clauses = extract_requirements("Use keys to move the piece.")
    assessment = classify_defects(clauses, tetris.reference_requirements)
    assert assessment.verdict_for("move_keys").defect is DefectKind.COMMISSION_AMBIGUOUS


def test_missing_qualifier_is_ambiguous(tetris):
    # Strong token overlap with the movement requirement, but the left/right/
    # down qualifiers are absent.
    clauses = extract_requirements("Use the arrow keys to move the falling piece.")
    assessment = classify_defects(clauses, tetris.reference_requirements)
    assert assessment.verdict_for("move_keys").defect is DefectKind.COMMISSION_AMBIGUOUS


def test_dropped_numeric_detail_is_ambiguous(tetris):
    clauses = extract_requirements("Render the game board.")
    assessment = classify_defects(clauses, tetris.reference_requirements)
    assert assessment.verdict_for("board_size").defect is DefectKind.COMMISSION_AMBIGUOUS


def test_contradictory_statements_inconsistent(tetris):
    prompt = (
        "Render the game board (8 rows by 6 columns).\n"
        "Render the game board (9 rows by 6 columns)."
    )
    assessment = classify_defects(extract_requirements(prompt), tetris.reference_requirements)
    assert assessment.verdict_for("board_size").defect is DefectKind.COMMISSION_INCONSISTENT


def test_unrelated_clause_reported_extraneous(tictactoe):
    prompt = "Render the title Tic-Tac-Toe on top of the board.\nMake the logo a dancing cat wearing a hat."
    assessment = classify_defects(extract_requirements(prompt), tictactoe.reference_requirements)
    assert [c.text for c in assessment.extraneous] == ["Make the logo a dancing cat wearing a hat."]


def test_deterministic_mode_is_byte_identical(tictactoe):
    prompt = "Render the title Tic-Tac-Toe on top of the board. The board is 4 by 4."
    one = classify_defects(extract_requirements(prompt), tictactoe.reference_requirements)
    two = classify_defects(extract_requirements(prompt), tictactoe.reference_requirements)
    assert json.dumps(one.to_dict(), sort_keys=True) == json.dumps(two.to_dict(), sort_keys=True)


def test_assessment_roundtrips_through_json(tictactoe):
    prompt = "Render the title Tic-Tac-Toe on top of the board."
    assessment = classify_defects(extract_requirements(prompt), tictactoe.reference_requirements)
    assert assessment_from_dict(assessment.to_dict()) == assessment


# --- judge mode ---------------------------------------------------------------

def judge_refs() -> list[Requirement]:
    return [
        Requirement(id="a", text="Show a splash screen at startup."),
        Requirement(id="b", text="Play a chime on victory."),
    ]


def test_judge_mode_parses_structured_replies():
    def handler(messages):
        body = messages[-1].content
        if body.startswith("REFERENCE: Show a splash screen"):
            return '{"status": "correct", "evidence_index": 0}'
        return '{"status": "omission", "evidence_index": null}'

    backend = mock_backend(handler=handler)
    matcher = Matcher(mode="judge", backend=backend)
    clauses = extract_requirements("Show a splash screen at startup.", DETERMINISTIC)
    assessment = classify_defects(clauses, judge_refs(), matcher)
    assert assessment.verdict_for("a").correct
    assert assessment.verdict_for("b").defect is DefectKind.OMISSION


def test_judge_mode_falls_back_per_item_on_malformed_reply():
    def handler(messages):
        body = messages[-1].content
        if body.startswith("REFERENCE: Show a splash screen"):
            return "utter nonsense, not json"
        return '{"status": "omission", "evidence_index": null}'

    backend = mock_backend(handler=handler)
    matcher = Matcher(mode="judge", backend=backend)
    clauses = extract_requirements("Show a splash screen at startup.", DETERMINISTIC)
    assessment = classify_defects(clauses, judge_refs(), matcher)
    # Malformed judge reply for "a" falls back to the deterministic verdict.
    assert assessment.verdict_for("a").correct
    assert assessment.verdict_for("b").defect is DefectKind.OMISSION


def test_judge_mode_gateway_failure_raises_judge_unavailable():
    backend = mock_backend()  # no script, no default: every call errors
    matcher = Matcher(mode="judge", backend=backend)
    clauses = extract_requirements("Show a splash screen at startup.", DETERMINISTIC)
    with pytest.raises(JudgeUnavailable):
        classify_defects(clauses, judge_refs(), matcher)


def test_judge_extraction_falls_back_to_deterministic():
    backend = mock_backend(handler=lambda messages: "not json at all")
    matcher = Matcher(mode="judge", backend=backend)
    clauses = extract_requirements("One thing. Another thing.", matcher)
    assert [c.text for c in clauses] == ["One thing.", "Another thing."]


# --- scores ----------------------------------------------------------------------

def make_assessment(statuses: list[DefectKind | None]) -> RequirementAssessment:
    dummy = ExtractedRequirement(text="stated clause", source_span=(0, 13), normalized="stated clause")
    verdicts = []
    for i, defect in enumerate(statuses):
        evidence = dummy if (defect is not None and defect is not DefectKind.OMISSION) else None
        verdicts.append(ReferenceVerdict(requirement_id=f"r{i}", defect=defect, evidence=evidence))
    return RequirementAssessment(verdicts=tuple(verdicts))


def test_requirement_quality_exact_fractions():
    nine = [None] * 3 + [DefectKind.OMISSION] * 6
    assert requirement_quality(make_assessment(nine)) == Fraction(1, 3)
    assert requirement_quality(make_assessment([DefectKind.OMISSION] * 4)) == 0
    assert requirement_quality(make_assessment([None] * 5)) == 1


def test_overall_score_trivial():
    assert overall_score(Fraction(2, 5), Fraction(1, 5)) == Fraction(3, 10)
    assert overall_score(1, 1) == 1


def test_overall_score_component_gain_consistency():
    # 25.4% and 12.7% component values average to 19.05% overall, exactly.
    assert overall_score(Fraction(254, 1000), Fraction(127, 1000)) == Fraction(1905, 10000)


def test_overall_score_out_of_range():
    with pytest.raises(OutOfRange):
        overall_score(1.2, 0.5)
    with pytest.raises(OutOfRange):
        overall_score(0.5, -0.1)


def test_count_defects_trivial():
    assert count_defects(make_assessment([None] * 4)) == (
        0,
        {kind: 0 for kind in COMMISSION_KINDS},
    )
    omissions, commissions = count_defects(
        make_assessment([DefectKind.OMISSION, DefectKind.OMISSION, DefectKind.COMMISSION_INCORRECT])
    )
    assert omissions == 2
    assert commissions[DefectKind.COMMISSION_INCORRECT] == 1
    assert commissions[DefectKind.COMMISSION_AMBIGUOUS] == 0


def random_statuses(rng: random.Random, n: int) -> list[DefectKind | None]:
    choices = [None, DefectKind.OMISSION, *COMMISSION_KINDS]
    return [rng.choice(choices) for _ in range(n)]


def test_count_defects_matches_brute_force_tally():
    rng = random.Random(99)
    for _ in range(200):
        statuses = random_statuses(rng, rng.randint(1, 12))
        omissions, commissions = count_defects(make_assessment(statuses))
        assert omissions == sum(1 for s in statuses if s is DefectKind.OMISSION)
        for kind in COMMISSION_KINDS:
            assert commissions[kind] == sum(1 for s in statuses if s is kind)
        # Partition: correct + omission + commission covers every reference.
        correct = sum(1 for s in statuses if s is None)
        assert correct + omissions + sum(commissions.values()) == len(statuses)


def test_monotonicity_of_requirement_quality():
    rng = random.Random(5)
    for _ in range(200):
        statuses = random_statuses(rng, rng.randint(2, 10))
        base = requirement_quality(make_assessment(statuses))
        flip = rng.randrange(len(statuses))
        promoted = list(statuses)
        promoted[flip] = None
        assert requirement_quality(make_assessment(promoted)) >= base
        demoted = list(statuses)
        demoted[flip] = DefectKind.OMISSION
        assert requirement_quality(make_assessment(demoted)) <= base


def test_score_report_consistency():
    assessment = make_assessment([None, DefectKind.OMISSION, DefectKind.COMMISSION_AMBIGUOUS])
    report = score_report(assessment, Fraction(1, 2))
    assert report.requirement_quality == Fraction(1, 3)
    assert report.overall == (Fraction(1, 3) + Fraction(1, 2)) / 2
    assert report.omission_count == 1
    assert report.commission_count == 1
    payload = report.to_dict()
    assert payload["commission_counts"]["commission_ambiguous"] == 1


def test_score_report_withheld_output_quality():
    report = score_report(make_assessment([None]), None)
    assert report.llm_output_quality is None
    assert report.overall is None
