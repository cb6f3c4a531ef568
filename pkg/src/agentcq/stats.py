"""Agreement, correlation, and significance statistics.

Everything is computed in-library from closed forms; scipy supplies only the
probability distributions behind p-values (F and studentized range).
Degenerate inputs raise ``StatisticUndefinedError`` instead of returning a
misleading 1.0 or 0.0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .domain import RatingsMatrix
from .errors import StatisticUndefinedError, ValidationError

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Intraclass correlation
# --------------------------------------------------------------------------


def icc(matrix: RatingsMatrix) -> float:
    """Two-way random-effects, absolute-agreement, average-of-k-raters ICC.

    Computed from the mean-squares decomposition of the items-by-raters
    table. Requires at least 2 items and 2 raters.
    """
    if matrix.n_items < 2:
        raise ValidationError("icc needs at least 2 items")
    if matrix.n_raters < 2:
        raise ValidationError("icc needs at least 2 raters")
    grid = np.asarray(matrix.scores, dtype=float)
    n, k = grid.shape
    grand = grid.mean()
    row_means = grid.mean(axis=1)
    col_means = grid.mean(axis=0)

    ms_rows = k * float(((row_means - grand) ** 2).sum()) / (n - 1)
    ms_cols = n * float(((col_means - grand) ** 2).sum()) / (k - 1)
    residual = grid - row_means[:, None] - col_means[None, :] + grand
    ms_error = float((residual**2).sum()) / ((n - 1) * (k - 1))

    if ms_rows == 0.0 and ms_error == 0.0:
        raise StatisticUndefinedError(
            "icc undefined: no between-item variance and no residual variance"
        )
    denominator = ms_rows + (ms_cols - ms_error) / n
    if denominator == 0.0:
        raise StatisticUndefinedError("icc undefined: zero denominator")
    return (ms_rows - ms_error) / denominator


# --------------------------------------------------------------------------
# Kappa statistics
# --------------------------------------------------------------------------


def weighted_kappa(
    rater_a: Sequence[float],
    rater_b: Sequence[float],
    scale_min: int,
    scale_max: int,
    weights: str = "quadratic",
) -> float:
    """Distance-weighted chance-corrected agreement for two raters.

    Disagreement weights are ``((i - j) / (k - 1)) ** p`` with p = 1 for
    linear and p = 2 for quadratic weighting; expected disagreement comes
    from the marginal products.
    """
    if weights not in ("linear", "quadratic"):
        raise ValidationError("weights must be 'linear' or 'quadratic'")
    if len(rater_a) != len(rater_b):
        raise ValidationError("rater score vectors must have equal length")
    if not rater_a:
        raise ValidationError("rater score vectors must be non-empty")
    k = int(scale_max) - int(scale_min) + 1
    if k < 2:
        raise ValidationError("scale must span at least 2 categories")
    power = 1 if weights == "linear" else 2

    n = len(rater_a)
    observed = np.zeros((k, k), dtype=float)
    for a, b in zip(rater_a, rater_b):
        i, j = int(a) - scale_min, int(b) - scale_min
        if not (0 <= i < k and 0 <= j < k):
            raise ValidationError(f"score pair ({a}, {b}) outside the declared scale")
        observed[i, j] += 1.0
    observed /= n
    marg_a = observed.sum(axis=1)
    marg_b = observed.sum(axis=0)
    expected = np.outer(marg_a, marg_b)

    idx = np.arange(k, dtype=float)
    weight_grid = (np.abs(idx[:, None] - idx[None, :]) / (k - 1)) ** power

    expected_disagreement = float((weight_grid * expected).sum())
    if expected_disagreement == 0.0:
        raise StatisticUndefinedError(
            "weighted kappa undefined: zero expected disagreement "
            "(both raters confined to a single category)"
        )
    observed_disagreement = float((weight_grid * observed).sum())
    return 1.0 - observed_disagreement / expected_disagreement


def fleiss_kappa(counts: Sequence[Sequence[int]], n_raters: int) -> float:
    """Chance-corrected agreement for many raters assigning categories.

    ``counts`` is an items-by-categories grid of assignment counts; each row
    must sum to ``n_raters``.
    """
    grid = np.asarray(counts, dtype=float)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 2:
        raise ValidationError("counts must be items x categories with >= 2 categories")
    if n_raters < 2:
        raise ValidationError("fleiss kappa needs at least 2 raters")
    row_sums = grid.sum(axis=1)
    if not np.all(row_sums == n_raters):
        bad = int(np.argmax(row_sums != n_raters))
        raise ValidationError(
            f"row {bad} sums to {int(row_sums[bad])}, expected n_raters={n_raters}"
        )
    n_items = grid.shape[0]
    p_item = ((grid**2).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_item.mean())
    p_category = grid.sum(axis=0) / (n_items * n_raters)
    p_expected = float((p_category**2).sum())
    if p_expected == 1.0:
        raise StatisticUndefinedError(
            "fleiss kappa undefined: all assignments in one category"
        )
    return (p_bar - p_expected) / (1.0 - p_expected)


def percent_agreement(grid: Sequence[Sequence], mode: str = "unanimous") -> float:
    """Raw agreement over an items-by-raters categorical grid.

    ``unanimous`` (default): fraction of items where all raters agree.
    ``pairwise``: mean over items of the fraction of agreeing rater pairs.
    """
    if mode not in ("unanimous", "pairwise"):
        raise ValidationError("mode must be 'unanimous' or 'pairwise'")
    rows = [tuple(row) for row in grid]
    if not rows:
        raise ValidationError("grid must be non-empty")
    width = len(rows[0])
    if width < 2:
        raise ValidationError("grid needs at least 2 raters")
    if any(len(row) != width for row in rows):
        raise ValidationError("grid must be complete (equal-length rows)")
    if mode == "unanimous":
        agreeing = sum(1 for row in rows if len(set(row)) == 1)
        return agreeing / len(rows)
    pair_total = width * (width - 1) / 2
    per_item = [
        sum(1 for a, b in combinations(row, 2) if a == b) / pair_total for row in rows
    ]
    return sum(per_item) / len(rows)


# --------------------------------------------------------------------------
# Rank correlations
# --------------------------------------------------------------------------


def _check_pair_vectors(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) != len(y):
        raise ValidationError("vectors must have equal length")
    if len(x) < 2:
        raise ValidationError("vectors must have length >= 2")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise StatisticUndefinedError("correlation undefined: zero variance")


def _merge_count_inversions(values: list[float]) -> int:
    """Count strict inversions (pairs i < j with v[i] > v[j]) via merge sort."""
    if len(values) < 2:
        return 0
    mid = len(values) // 2
    left, right = values[:mid], values[mid:]
    inversions = _merge_count_inversions(left) + _merge_count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if right[j] < left[i]:
            inversions += len(left) - i
            merged.append(right[j])
            j += 1
        else:
            merged.append(left[i])
            i += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    values[:] = merged
    return inversions


def _tie_pair_count(values: Sequence[float]) -> int:
    seen: dict[float, int] = {}
    for value in values:
        seen[value] = seen.get(value, 0) + 1
    return sum(c * (c - 1) // 2 for c in seen.values())


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected rank correlation (tau-b).

    Discordant pairs are counted with a merge-sort inversion count after
    sorting by (x, y), which keeps the computation O(n log n).
    """
    _check_pair_vectors(x, y)
    n = len(x)
    order = sorted(range(n), key=lambda i: (x[i], y[i]))
    ys = [y[i] for i in order]

    n0 = n * (n - 1) // 2
    ties_x = _tie_pair_count(x)
    ties_y = _tie_pair_count(y)
    ties_xy = _tie_pair_count(list(zip(x, y)))
    discordant = _merge_count_inversions(ys)

    numerator = n0 - ties_x - ties_y + ties_xy - 2 * discordant
    denominator = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denominator == 0.0:
        raise StatisticUndefinedError("kendall tau undefined: all values tied")
    return numerator / denominator


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties assigned the mean of their positions."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[order[t]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    _check_pair_vectors(x, y)
    rx = np.asarray(average_ranks(x))
    ry = np.asarray(average_ranks(y))
    rx -= rx.mean()
    ry -= ry.mean()
    denominator = math.sqrt(float((rx**2).sum()) * float((ry**2).sum()))
    if denominator == 0.0:
        raise StatisticUndefinedError("spearman rho undefined: zero rank variance")
    return float((rx * ry).sum()) / denominator


# --------------------------------------------------------------------------
# Analysis of variance and post-hoc comparisons
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int
    ms_within: float


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way fixed-effects F test across score groups."""
    if len(groups) < 2:
        raise ValidationError("anova needs at least 2 groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(a.size < 2 for a in arrays):
        raise ValidationError("every group needs at least 2 observations")
    n_total = sum(a.size for a in arrays)
    k = len(arrays)
    grand = sum(float(a.sum()) for a in arrays) / n_total

    ss_between = sum(a.size * (float(a.mean()) - grand) ** 2 for a in arrays)
    ss_within = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays)
    df_between = k - 1
    df_within = n_total - k
    if ss_within == 0.0:
        raise StatisticUndefinedError(
            "anova undefined: zero within-group variance everywhere"
        )
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    f_statistic = ms_between / ms_within
    p_value = float(sps.f.sf(f_statistic, df_between, df_within))
    return AnovaResult(
        f_statistic=f_statistic,
        p_value=p_value,
        df_between=df_between,
        df_within=df_within,
        ms_within=ms_within,
    )


@dataclass(frozen=True)
class PairComparison:
    group_a: int
    group_b: int
    mean_difference: float
    p_value: float
    significant: bool


def tukey_hsd(
    groups: Sequence[Sequence[float]], alpha_sig: float = 0.05
) -> list[PairComparison]:
    """All pairwise mean differences with studentized-range adjusted p-values.

    ``mean_difference`` is mean(group_b) - mean(group_a) for a < b; a pair is
    flagged significant when its adjusted p falls below ``alpha_sig``.
    """
    result = anova_oneway(groups)
    arrays = [np.asarray(g, dtype=float) for g in groups]
    k = len(arrays)
    comparisons: list[PairComparison] = []
    for a, b in combinations(range(k), 2):
        diff = float(arrays[b].mean() - arrays[a].mean())
        se = math.sqrt(
            (result.ms_within / 2.0) * (1.0 / arrays[a].size + 1.0 / arrays[b].size)
        )
        if se == 0.0:
            raise StatisticUndefinedError("tukey undefined: zero standard error")
        q = abs(diff) / se
        p_value = float(sps.studentized_range.sf(q, k, result.df_within))
        comparisons.append(
            PairComparison(
                group_a=a,
                group_b=b,
                mean_difference=diff,
                p_value=p_value,
                significant=bool(p_value < alpha_sig),
            )
        )
    return comparisons


# --------------------------------------------------------------------------
# Trinomial test
# --------------------------------------------------------------------------


def trinomial_test(wins_a: int, wins_b: int, ties: int) -> float:
    """Exact two-sided test of P(win A) = P(win B) with ties as a third
    category whose probability is estimated from the sample.

    Enumerates all (a, b, t) outcomes of the null trinomial and sums the
    probability of a win-count difference at least as extreme as observed.
    An all-tie sample returns 1.0 (degenerate, logged).
    """
    for name, value in (("wins_a", wins_a), ("wins_b", wins_b), ("ties", ties)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ValidationError(f"{name} must be a non-negative integer")
    n = wins_a + wins_b + ties
    if n < 1:
        raise ValidationError("need at least one observation")
    if wins_a == 0 and wins_b == 0:
        logger.warning("trinomial test degenerate: all %d observations are ties", ties)
        return 1.0

    observed_diff = abs(wins_a - wins_b)
    if observed_diff == 0:
        return 1.0

    p_tie = ties / n
    p_win = (1.0 - p_tie) / 2.0
    log_p_win = math.log(p_win)
    log_p_tie = math.log(p_tie) if p_tie > 0.0 else None

    log_fact = [0.0] * (n + 1)
    for i in range(1, n + 1):
        log_fact[i] = log_fact[i - 1] + math.log(i)

    total = 0.0
    for a in range(n + 1):
        for b in range(n + 1 - a):
            if abs(a - b) < observed_diff:
                continue
            t = n - a - b
            if t > 0 and log_p_tie is None:
                continue
            log_pmf = (
                log_fact[n] - log_fact[a] - log_fact[b] - log_fact[t]
                + (a + b) * log_p_win
                + (t * log_p_tie if t > 0 else 0.0)
            )
            total += math.exp(log_pmf)
    return min(total, 1.0)


# --------------------------------------------------------------------------
# Panel-level report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AgreementReport:
    """Reliability summary for one items-by-raters ratings matrix.

    Components that are undefined for the given matrix (degenerate variance)
    are reported as None rather than a fabricated value.
    """

    icc: float | None
    weighted_kappa: float | None
    fleiss_kappa: float | None
    percent_agreement: float
    n_items: int
    n_raters: int


def _pairwise_weighted_kappas(matrix: RatingsMatrix, weights: str) -> list[float]:
    columns = list(zip(*matrix.scores))
    values: list[float] = []
    for a, b in combinations(range(matrix.n_raters), 2):
        try:
            values.append(
                weighted_kappa(
                    columns[a],
                    columns[b],
                    int(matrix.scale_min),
                    int(matrix.scale_max),
                    weights=weights,
                )
            )
        except StatisticUndefinedError:
            continue
    return values


def matrix_to_category_counts(matrix: RatingsMatrix) -> list[list[int]]:
    """Items-by-categories assignment counts over the integer scale."""
    lo, hi = int(matrix.scale_min), int(matrix.scale_max)
    counts = []
    for row in matrix.scores:
        item_counts = [0] * (hi - lo + 1)
        for value in row:
            item_counts[int(value) - lo] += 1
        counts.append(item_counts)
    return counts


def agreement_report(matrix: RatingsMatrix, weights: str = "quadratic") -> AgreementReport:
    """ICC, mean pairwise weighted kappa, Fleiss kappa, and raw agreement."""
    try:
        icc_value: float | None = icc(matrix)
    except StatisticUndefinedError:
        icc_value = None
    kappas = _pairwise_weighted_kappas(matrix, weights)
    mean_kappa = sum(kappas) / len(kappas) if kappas else None
    try:
        fleiss_value: float | None = fleiss_kappa(
            matrix_to_category_counts(matrix), matrix.n_raters
        )
    except StatisticUndefinedError:
        fleiss_value = None
    return AgreementReport(
        icc=icc_value,
        weighted_kappa=mean_kappa,
        fleiss_kappa=fleiss_value,
        percent_agreement=percent_agreement(matrix.scores),
        n_items=matrix.n_items,
        n_raters=matrix.n_raters,
    )
