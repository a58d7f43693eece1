from __future__ import annotations

import math
import random

import pytest

from ropetrain.errors import DegenerateInput, LengthMismatch
from ropetrain.stats import (
    average_ranks,
    icc,
    krippendorff_alpha,
    paired_t,
    spearman_rho,
    two_sample_t,
)

import oracles


def test_average_ranks_ties():
    assert average_ranks([1, 2, 2, 4]) == [1.0, 2.5, 2.5, 4.0]
    assert average_ranks([5, 5, 5]) == [2.0, 2.0, 2.0]


def test_spearman_identical_vectors():
    assert spearman_rho([1, 2, 3, 4], [1, 2, 3, 4]).value == pytest.approx(1.0)


def test_spearman_reversed():
    assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]).value == pytest.approx(-1.0)


def test_spearman_tie_fixture_matches_oracle():
    xs, ys = [1, 2, 2, 4], [3, 1, 2, 4]
    result = spearman_rho(xs, ys)
    rho, p = oracles.brute_spearman(xs, ys)
    assert result.value == pytest.approx(rho, abs=1e-12)
    assert result.value == pytest.approx(math.sqrt(0.1), abs=1e-12)
    assert result.p_value == pytest.approx(p, abs=1e-9)


def test_spearman_errors():
    with pytest.raises(LengthMismatch):
        spearman_rho([1, 2, 3], [1, 2])
    with pytest.raises(DegenerateInput):
        spearman_rho([1, 2], [1, 2])
    with pytest.raises(DegenerateInput):
        spearman_rho([1, 1, 1], [1, 2, 3])


def test_spearman_monotone_transform_invariance():
    rng = random.Random(7)
    xs = [rng.random() for _ in range(15)]
    ys = [rng.random() for _ in range(15)]
    base = spearman_rho(xs, ys).value
    assert spearman_rho([math.exp(x) for x in xs], ys).value == pytest.approx(base, abs=1e-12)
    assert spearman_rho(xs, [y**3 + 2 for y in ys]).value == pytest.approx(base, abs=1e-12)


def test_paired_t_identical_vectors():
    result = paired_t([1, 2, 3], [1, 2, 3])
    assert result.value == 0.0
    assert result.p_value == 1.0


def test_paired_t_constant_shift_degenerate():
    with pytest.raises(DegenerateInput):
        paired_t([1, 2, 3], [2, 3, 4])


def test_paired_t_fixture_matches_oracle():
    pre = [0.21, 0.30, 0.12, 0.45, 0.28, 0.36]
    post = [0.40, 0.42, 0.30, 0.44, 0.50, 0.41]
    result = paired_t(pre, post)
    t, p = oracles.brute_paired_t(pre, post)
    assert result.value == pytest.approx(t, abs=1e-12)
    assert result.p_value == pytest.approx(p, abs=1e-9)


def test_two_sample_t_equal_samples():
    result = two_sample_t([1, 2, 3], [1, 2, 3])
    assert result.value == 0.0
    assert result.p_value == pytest.approx(1.0)


def test_two_sample_t_far_separated():
    result = two_sample_t([0.0, 0.01, 0.02, 0.015], [100.0, 100.5, 99.5, 100.2])
    assert result.value < 0
    assert result.p_value < 1e-6


def test_two_sample_t_fixture_matches_oracle():
    a = [0.191, 0.25, 0.12, 0.31, 0.18]
    b = [0.007, 0.02, -0.05, 0.09]
    result = two_sample_t(a, b)
    t, p = oracles.brute_welch_t(a, b)
    assert result.value == pytest.approx(t, abs=1e-12)
    assert result.p_value == pytest.approx(p, abs=1e-9)


def test_two_sample_t_degenerate():
    with pytest.raises(DegenerateInput):
        two_sample_t([1.0], [1.0, 2.0])
    with pytest.raises(DegenerateInput):
        two_sample_t([1.0, 1.0], [2.0, 2.0])


def test_icc_identical_raters():
    ratings = [[1, 2, 3, 4, 5, 6], [1, 2, 3, 4, 5, 6]]
    result = icc(ratings)
    assert result.value == pytest.approx(1.0)
    assert result.ci == (pytest.approx(1.0), pytest.approx(1.0))


def test_icc_fixture_matches_oracle():
    ratings = [
        [0.9, 0.5, 0.3, 0.8, 0.6, 0.2, 0.7, 0.85, 0.35, 0.55],
        [0.8, 0.6, 0.25, 0.85, 0.55, 0.3, 0.65, 0.9, 0.4, 0.5],
    ]
    result = icc(ratings)
    value, p = oracles.brute_icc2(ratings)
    assert result.value == pytest.approx(value, abs=1e-12)
    assert result.p_value == pytest.approx(p, abs=1e-9)
    assert result.ci is not None
    low, high = result.ci
    assert low <= result.value <= high


def test_icc_constant_matrix_degenerate():
    with pytest.raises(DegenerateInput):
        icc([[2.0] * 6, [2.0] * 6])


def test_icc_shape_preconditions():
    with pytest.raises(DegenerateInput):
        icc([[1, 2, 3, 4, 5]])
    with pytest.raises(DegenerateInput):
        icc([[1, 2], [1, 2]])


def test_krippendorff_perfect_agreement():
    rows = [["a", "b", "a", "c"], ["a", "b", "a", "c"]]
    assert krippendorff_alpha(rows).value == pytest.approx(1.0)


def test_krippendorff_hand_computed_case():
    # 4 items, one disagreement: coincidences give D_o = 2, D_e = 30/7,
    # so alpha = 1 - 14/30 = 8/15.
    rows = [["a", "a", "b", "b"], ["a", "a", "b", "a"]]
    result = krippendorff_alpha(rows)
    assert result.value == pytest.approx(8 / 15, abs=1e-12)
    assert result.value == pytest.approx(oracles.brute_krippendorff(rows), abs=1e-12)


def test_krippendorff_fixture_matches_oracle():
    rows = [
        ["x", "y", "x", "z", "y", "x", "x", "z", "y", "x", "z", "y"],
        ["x", "y", "y", "z", "y", "x", "z", "z", "y", "x", "x", "y"],
    ]
    assert krippendorff_alpha(rows).value == pytest.approx(
        oracles.brute_krippendorff(rows), abs=1e-12
    )


def test_krippendorff_missing_ratings():
    rows = [
        ["a", "b", None, "a"],
        ["a", "b", "c", None],
        [None, "b", "c", "a"],
    ]
    result = krippendorff_alpha(rows, allow_missing=True)
    assert result.value == pytest.approx(oracles.brute_krippendorff(rows), abs=1e-12)
    with pytest.raises(ValueError):
        krippendorff_alpha(rows)


def test_krippendorff_single_category_degenerate():
    with pytest.raises(DegenerateInput):
        krippendorff_alpha([["a", "a", "a"], ["a", "a", "a"]])


def test_random_instances_match_oracles():
    rng = random.Random(2024)
    for _ in range(60):
        n = rng.randint(4, 20)
        xs = [rng.randint(0, 8) / 2 for _ in range(n)]
        ys = [rng.randint(0, 8) / 2 for _ in range(n)]
        try:
            mine = spearman_rho(xs, ys)
        except DegenerateInput:
            continue
        rho, p = oracles.brute_spearman(xs, ys)
        assert mine.value == pytest.approx(rho, abs=1e-9)
        assert mine.p_value == pytest.approx(p, abs=1e-6)
