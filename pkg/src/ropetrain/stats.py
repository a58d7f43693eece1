"""Statistics used by the evaluation pipeline.

Implemented from their textbook definitions on top of scipy's distribution
functions: rank correlation with average-rank ties, paired and Welch t-tests,
two-way random single-measure ICC with the standard F-bound confidence
interval, and nominal Krippendorff's alpha over a coincidence matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateInput, LengthMismatch


@dataclass(frozen=True)
class StatResult:
    name: str
    value: float
    n: int
    p_value: float | None = None
    ci: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "n": self.n,
            "p_value": self.p_value,
            "ci": None if self.ci is None else list(self.ci),
        }


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        averaged = (i + j) / 2 + 1
        for idx in order[i : j + 1]:
            ranks[idx] = averaged
        i = j + 1
    return ranks


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> StatResult:
    """Rank correlation: Pearson correlation of average ranks."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 3:
        raise DegenerateInput(f"need at least 3 pairs, got {n}")
    rx = np.array(average_ranks(xs))
    ry = np.array(average_ranks(ys))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise DegenerateInput("zero rank variance in one input")
    rho = float(dx @ dy) / denom
    if abs(rho) >= 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = 2.0 * float(sps.t.sf(abs(t), n - 2))
    return StatResult(name="spearman_rho", value=rho, n=n, p_value=p)


def paired_t(pre: Sequence[float], post: Sequence[float]) -> StatResult:
    """Two-tailed paired t-test on post - pre differences."""
    if len(pre) != len(post):
        raise LengthMismatch(f"lengths differ: {len(pre)} vs {len(post)}")
    n = len(pre)
    if n < 2:
        raise DegenerateInput(f"need at least 2 pairs, got {n}")
    diffs = np.asarray(post, dtype=float) - np.asarray(pre, dtype=float)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            # Identical vectors: no change and no evidence of one.
            return StatResult(name="paired_t", value=0.0, n=n, p_value=1.0)
        raise DegenerateInput("zero difference variance")
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(sps.t.sf(abs(t), n - 1))
    return StatResult(name="paired_t", value=t, n=n, p_value=p)


def two_sample_t(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Welch's unequal-variance two-sample t-test, two-tailed."""
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise DegenerateInput(f"need at least 2 per sample, got {na} and {nb}")
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    se_sq = va / na + vb / nb
    if se_sq == 0.0:
        raise DegenerateInput("both samples have zero variance")
    t = (float(xa.mean()) - float(xb.mean())) / math.sqrt(se_sq)
    dof = se_sq**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(sps.t.sf(abs(t), dof))
    return StatResult(name="welch_t", value=t, n=na + nb, p_value=p)


def icc(ratings: Sequence[Sequence[float]]) -> StatResult:
    """ICC(2,1): two-way random effects, absolute agreement, single measure.

    ``ratings`` is a raters x subjects matrix with no missing cells. The 95%
    confidence interval follows the standard F-bounds construction; the
    p-value tests ICC = 0 via F = MSR/MSE.
    """
    matrix = np.asarray(ratings, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("ratings must be a 2-D raters x subjects matrix")
    if np.isnan(matrix).any():
        raise ValueError("ratings must have no missing cells")
    k, n = matrix.shape
    if k < 2:
        raise DegenerateInput(f"need at least 2 raters, got {k}")
    if n < 5:
        raise DegenerateInput(f"need at least 5 subjects, got {n}")

    x = matrix.T  # subjects x raters
    grand = float(x.mean())
    subj_means = x.mean(axis=1)
    rater_means = x.mean(axis=0)
    ssr = k * float(((subj_means - grand) ** 2).sum())
    ssc = n * float(((rater_means - grand) ** 2).sum())
    sse = float(((x - subj_means[:, None] - rater_means[None, :] + grand) ** 2).sum())
    if ssr == 0.0:
        raise DegenerateInput("zero between-subject variance")
    msr = ssr / (n - 1)
    msc = ssc / (k - 1)
    mse = sse / ((n - 1) * (k - 1))

    value = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)

    if mse == 0.0:
        # Raters agree exactly: ICC is 1 with a degenerate interval.
        return StatResult(name="icc_2_1", value=value, n=n, p_value=0.0, ci=(value, value))

    p = float(sps.f.sf(msr / mse, n - 1, (n - 1) * (k - 1)))
    ci = _icc2_ci(value, msr, msc, mse, n, k, alpha=0.05)
    return StatResult(name="icc_2_1", value=value, n=n, p_value=p, ci=ci)


def _icc2_ci(
    icc_value: float, msr: float, msc: float, mse: float, n: int, k: int, alpha: float
) -> tuple[float, float]:
    fc = msc / mse
    a = k * icc_value * fc + n * (1 + (k - 1) * icc_value) - k * icc_value
    vn = (k - 1) * (n - 1) * a**2
    vd = (n - 1) * (k**2) * (icc_value**2) * (fc**2) + (n * (1 + (k - 1) * icc_value) - k * icc_value) ** 2
    v = vn / vd
    f_upper = float(sps.f.ppf(1 - alpha / 2, n - 1, v))
    f_lower = float(sps.f.ppf(1 - alpha / 2, v, n - 1))
    lower = n * (msr - f_upper * mse) / (f_upper * (k * msc + (k * n - k - n) * mse) + n * msr)
    upper = n * (f_lower * msr - mse) / (k * msc + (k * n - k - n) * mse + n * f_lower * msr)
    return (lower, upper)


def krippendorff_alpha(
    annotations: Sequence[Sequence[Hashable | None]],
    allow_missing: bool = False,
) -> StatResult:
    """Nominal-level alpha from observed/expected disagreement over the
    coincidence matrix.

    ``annotations`` is a raters x items matrix of nominal labels; ``None``
    marks a missing rating when ``allow_missing`` is set. Items with fewer
    than two ratings cannot pair and are dropped.
    """
    rows = [list(r) for r in annotations]
    if len(rows) < 2:
        raise DegenerateInput(f"need at least 2 raters, got {len(rows)}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LengthMismatch("raters rated different item counts")
    if width < 2:
        raise DegenerateInput(f"need at least 2 items, got {width}")
    if not allow_missing and any(value is None for row in rows for value in row):
        raise ValueError("missing ratings present; pass allow_missing=True")

    coincidence: dict[Hashable, dict[Hashable, float]] = {}
    usable_items = 0
    for item in range(width):
        values = [row[item] for row in rows if row[item] is not None]
        m = len(values)
        if m < 2:
            continue
        usable_items += 1
        for i, vi in enumerate(values):
            for j, vj in enumerate(values):
                if i == j:
                    continue
                coincidence.setdefault(vi, {}).setdefault(vj, 0.0)
                coincidence[vi][vj] += 1.0 / (m - 1)
    if usable_items == 0:
        raise DegenerateInput("no item has two or more ratings")

    categories = sorted(coincidence, key=repr)
    totals = {c: sum(coincidence[c].values()) for c in categories}
    total = sum(totals.values())
    observed = sum(
        coincidence[c].get(d, 0.0) for c in categories for d in categories if c != d
    )
    expected = sum(
        totals[c] * totals[d] for c in categories for d in categories if c != d
    ) / (total - 1)
    if expected == 0.0:
        raise DegenerateInput("single category across all ratings")
    alpha = 1.0 - observed / expected
    return StatResult(name="krippendorff_alpha", value=alpha, n=usable_items)
