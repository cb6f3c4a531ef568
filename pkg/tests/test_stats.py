"""Statistics tests.

Each operation is checked against an independent oracle implemented here
with a deliberately different computational route (explicit loops, least
squares residuals, pair counting, quadrature, permutation, Monte Carlo).
"""

import math
import random

import numpy as np
import pytest
from scipy import stats as sps
from scipy.integrate import quad

from agentcq.domain import RatingsMatrix
from agentcq.errors import StatisticUndefinedError, ValidationError
from agentcq.stats import (
    AnovaResult,
    agreement_report,
    anova_oneway,
    average_ranks,
    fleiss_kappa,
    icc,
    kendall_tau,
    percent_agreement,
    spearman_rho,
    trinomial_test,
    tukey_hsd,
    weighted_kappa,
)


# --------------------------------------------------------------------------
# Oracles
# --------------------------------------------------------------------------


def icc_oracle(rows):
    """ICC(2,k) with loop-based mean squares and a least-squares residual."""
    n, k = len(rows), len(rows[0])
    grand = sum(sum(r) for r in rows) / (n * k)
    row_means = [sum(r) / k for r in rows]
    col_means = [sum(rows[i][j] for i in range(n)) / n for j in range(k)]
    msr = k * sum((m - grand) ** 2 for m in row_means) / (n - 1)
    msc = n * sum((m - grand) ** 2 for m in col_means) / (k - 1)

    # residual sum of squares from an explicit additive least-squares fit
    y = np.array([rows[i][j] for i in range(n) for j in range(k)], dtype=float)
    design = np.zeros((n * k, 1 + n + k))
    for i in range(n):
        for j in range(k):
            row = i * k + j
            design[row, 0] = 1.0
            design[row, 1 + i] = 1.0
            design[row, 1 + n + j] = 1.0
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    sse = float(((y - design @ beta) ** 2).sum())
    mse = sse / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (msc - mse) / n)


def weighted_kappa_oracle(a, b, lo, hi, power):
    """Direct summation over the full contingency table."""
    k = hi - lo + 1
    n = len(a)
    observed = [[0.0] * k for _ in range(k)]
    for x, y in zip(a, b):
        observed[int(x) - lo][int(y) - lo] += 1.0 / n
    marg_a = [sum(observed[i][j] for j in range(k)) for i in range(k)]
    marg_b = [sum(observed[i][j] for i in range(k)) for j in range(k)]
    num = den = 0.0
    for i in range(k):
        for j in range(k):
            weight = (abs(i - j) / (k - 1)) ** power
            num += weight * observed[i][j]
            den += weight * marg_a[i] * marg_b[j]
    return 1.0 - num / den


def fleiss_oracle(counts, n_raters):
    """Manual formula evaluation, kept in loop form."""
    n_items = len(counts)
    p_items = [
        (sum(c * c for c in row) - n_raters) / (n_raters * (n_raters - 1))
        for row in counts
    ]
    p_bar = sum(p_items) / n_items
    n_categories = len(counts[0])
    p_cat = [
        sum(row[j] for row in counts) / (n_items * n_raters)
        for j in range(n_categories)
    ]
    p_expected = sum(p * p for p in p_cat)
    return (p_bar - p_expected) / (1.0 - p_expected)


def tau_oracle(x, y):
    """Exhaustive O(n^2) pair counting for tau-b."""
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0:
                ties_x += 1
            if dy == 0:
                ties_y += 1
            if dx * dy > 0:
                concordant += 1
            elif dx * dy < 0:
                discordant += 1
    n0 = n * (n - 1) // 2
    return (concordant - discordant) / math.sqrt((n0 - ties_x) * (n0 - ties_y))


def spearman_oracle(x, y):
    """Ranks by counting (independent of sorting), then explicit Pearson."""
    def ranks(values):
        out = []
        for i, v in enumerate(values):
            smaller = sum(1 for w in values if w < v)
            equal = sum(1 for j, w in enumerate(values) if w == v and j != i)
            out.append(smaller + equal / 2.0 + 1.0)
        return out

    rx, ry = ranks(x), ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    var_x = sum((a - mx) ** 2 for a in rx)
    var_y = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(var_x * var_y)


def f_sf_by_quadrature(f_value, d1, d2):
    """Survival probability by numerical integration of the F density."""
    const = math.gamma((d1 + d2) / 2) / (math.gamma(d1 / 2) * math.gamma(d2 / 2))

    def density(x):
        return const * (d1 / d2) ** (d1 / 2) * x ** (d1 / 2 - 1) * (
            1 + d1 * x / d2
        ) ** (-(d1 + d2) / 2)

    value, _ = quad(density, f_value, math.inf, epsabs=1e-10, epsrel=1e-10)
    return value


def tukey_significant_set_by_permutation(groups, alpha, n_shuffles=100_000, seed=0):
    """Max-T permutation reference for the Tukey significant-pair set."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([np.asarray(g, dtype=float) for g in groups])
    sizes = [len(g) for g in groups]
    starts = np.cumsum([0] + sizes)
    k = len(groups)
    n_total = pooled.size
    df_within = n_total - k

    def pair_stats(values):
        parts = [values[starts[i]: starts[i + 1]] for i in range(k)]
        mse = sum(((p - p.mean()) ** 2).sum() for p in parts) / df_within
        stats = {}
        for a in range(k):
            for b in range(a + 1, k):
                se = math.sqrt((mse / 2.0) * (1 / sizes[a] + 1 / sizes[b]))
                stats[(a, b)] = abs(parts[a].mean() - parts[b].mean()) / se
        return stats

    observed = pair_stats(pooled)
    shuffled = np.tile(pooled, (n_shuffles, 1))
    rng.permuted(shuffled, axis=1, out=shuffled)

    # Vectorized max-q over pairs for every shuffle
    group_means = np.stack(
        [shuffled[:, starts[i]: starts[i + 1]].mean(axis=1) for i in range(k)]
    )
    sse = sum(
        ((shuffled[:, starts[i]: starts[i + 1]] - group_means[i][:, None]) ** 2).sum(
            axis=1
        )
        for i in range(k)
    )
    mse = sse / df_within
    max_q = np.zeros(n_shuffles)
    for a in range(k):
        for b in range(a + 1, k):
            se = np.sqrt((mse / 2.0) * (1 / sizes[a] + 1 / sizes[b]))
            q = np.abs(group_means[a] - group_means[b]) / se
            max_q = np.maximum(max_q, q)

    significant = set()
    for pair, q_obs in observed.items():
        p_adj = float((max_q >= q_obs).mean())
        if p_adj < alpha:
            significant.add(pair)
    return significant


def trinomial_mc_oracle(wins_a, wins_b, ties, n_draws=1_000_000, seed=0):
    rng = np.random.default_rng(seed)
    n = wins_a + wins_b + ties
    p_tie = ties / n
    p_win = (1 - p_tie) / 2
    draws = rng.multinomial(n, [p_win, p_win, p_tie], size=n_draws)
    diff = np.abs(draws[:, 0] - draws[:, 1])
    return float((diff >= abs(wins_a - wins_b)).mean())


def matrix_from(rows):
    return RatingsMatrix.from_rows(
        items=[f"i{i}" for i in range(len(rows))],
        raters=[f"r{j}" for j in range(len(rows[0]))],
        scores=rows,
        scale_min=1,
        scale_max=10,
    )


# --------------------------------------------------------------------------
# ICC
# --------------------------------------------------------------------------


class TestIcc:
    def test_identical_rater_columns_give_one(self):
        rows = [[v] * 3 for v in (2, 5, 7, 9)]
        assert icc(matrix_from(rows)) == pytest.approx(1.0, abs=0)

    def test_hand_fixture_matches_decomposition_oracle(self):
        rows = [
            [9, 2, 5],
            [6, 1, 3],
            [8, 4, 6],
            [7, 1, 2],
            [10, 5, 6],
        ]
        assert icc(matrix_from(rows)) == pytest.approx(icc_oracle(rows), abs=1e-9)
        assert icc(matrix_from(rows)) == pytest.approx(0.4822006472491909, abs=1e-12)

    def test_constant_matrix_is_error_not_one(self):
        rows = [[5, 5, 5]] * 4
        with pytest.raises(StatisticUndefinedError):
            icc(matrix_from(rows))

    def test_single_disagreement_drops_below_one(self):
        rows = [[2, 2, 2], [5, 5, 5], [7, 7, 8], [9, 9, 9]]
        assert icc(matrix_from(rows)) < 1.0

    def test_needs_two_items_and_raters(self):
        with pytest.raises(ValidationError):
            icc(matrix_from([[1, 2]]))

    def test_row_permutation_invariance(self):
        rows = [[9, 2, 5], [6, 1, 3], [8, 4, 6], [7, 1, 2]]
        shuffled = [rows[2], rows[0], rows[3], rows[1]]
        assert icc(matrix_from(rows)) == pytest.approx(
            icc(matrix_from(shuffled)), abs=1e-12
        )


# --------------------------------------------------------------------------
# Weighted kappa
# --------------------------------------------------------------------------


class TestWeightedKappa:
    def test_identical_vectors_one_for_both_weightings(self):
        a = [1, 3, 5, 7, 9, 10, 2]
        assert weighted_kappa(a, a, 1, 10, "linear") == pytest.approx(1.0, abs=0)
        assert weighted_kappa(a, a, 1, 10, "quadratic") == pytest.approx(1.0, abs=0)

    def test_reversal_fixture_matches_direct_summation(self):
        a, b = [1, 2, 3, 4], [4, 3, 2, 1]
        value = weighted_kappa(a, b, 1, 4, "quadratic")
        assert value == pytest.approx(weighted_kappa_oracle(a, b, 1, 4, 2), abs=1e-12)
        assert value == pytest.approx(-1.0, abs=1e-12)
        linear = weighted_kappa(a, b, 1, 4, "linear")
        assert linear == pytest.approx(weighted_kappa_oracle(a, b, 1, 4, 1), abs=1e-12)
        assert linear == pytest.approx(-0.6, abs=1e-12)

    def test_null_calibration_on_independent_raters(self):
        rng = random.Random(2024)
        n = 10_000
        a = [rng.randint(1, 10) for _ in range(n)]
        b = [rng.randint(1, 10) for _ in range(n)]
        for weights in ("linear", "quadratic"):
            assert abs(weighted_kappa(a, b, 1, 10, weights)) <= 0.03

    def test_single_category_degenerate(self):
        with pytest.raises(StatisticUndefinedError):
            weighted_kappa([5, 5, 5], [5, 5, 5], 1, 10)

    def test_single_disagreement_below_one(self):
        a = [1, 2, 3, 4, 5]
        b = [1, 2, 3, 4, 6]
        assert weighted_kappa(a, b, 1, 10) < 1.0


# --------------------------------------------------------------------------
# Fleiss kappa and percent agreement
# --------------------------------------------------------------------------


class TestFleissKappa:
    def test_unanimous_items_give_one(self):
        counts = [[3, 0], [0, 3], [3, 0], [0, 3]]
        assert fleiss_kappa(counts, 3) == pytest.approx(1.0, abs=0)

    def test_hand_grid_matches_manual_computation(self):
        counts = [[3, 0], [2, 1], [1, 2], [0, 3]]
        value = fleiss_kappa(counts, 3)
        assert value == pytest.approx(fleiss_oracle(counts, 3), abs=1e-12)
        assert value == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_row_sum_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="row 1"):
            fleiss_kappa([[3, 0], [1, 1]], 3)

    def test_all_one_category_degenerate(self):
        with pytest.raises(StatisticUndefinedError):
            fleiss_kappa([[3, 0], [3, 0]], 3)

    def test_null_calibration(self):
        rng = random.Random(7)
        counts = []
        for _ in range(10_000):
            votes = [rng.randint(0, 1) for _ in range(3)]
            counts.append([votes.count(0), votes.count(1)])
        assert abs(fleiss_kappa(counts, 3)) <= 0.03


class TestPercentAgreement:
    def test_unanimous_grid(self):
        grid = [["A", "A", "A"], ["B", "B", "B"]]
        assert percent_agreement(grid) == 1.0

    def test_seven_of_ten_unanimous(self):
        grid = [["A", "A", "A"]] * 7 + [["A", "B", "A"]] * 3
        assert percent_agreement(grid) == pytest.approx(0.7, abs=0)

    def test_pairwise_variant_differs_on_partial_agreement(self):
        grid = [["A", "A", "B"]] * 4
        unanimous = percent_agreement(grid, mode="unanimous")
        pairwise = percent_agreement(grid, mode="pairwise")
        assert unanimous == 0.0
        assert pairwise == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert unanimous != pairwise


# --------------------------------------------------------------------------
# Rank correlations
# --------------------------------------------------------------------------


class TestRankCorrelations:
    def test_identity_gives_one(self):
        x = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0]
        assert kendall_tau(x, x) == pytest.approx(1.0, abs=0)
        assert spearman_rho(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_reversal_gives_minus_one(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        y = list(reversed(x))
        assert kendall_tau(x, y) == pytest.approx(-1.0, abs=0)
        assert spearman_rho(x, y) == pytest.approx(-1.0, abs=1e-12)

    def test_length_eight_with_ties_matches_pair_count_oracle(self):
        x = [1, 2, 2, 3, 4, 4, 4, 5]
        y = [2, 1, 3, 3, 5, 4, 6, 6]
        assert kendall_tau(x, y) == pytest.approx(tau_oracle(x, y), abs=1e-12)
        assert spearman_rho(x, y) == pytest.approx(spearman_oracle(x, y), abs=1e-12)

    def test_matches_library_reference_with_ties(self):
        rng = random.Random(11)
        x = [rng.randint(1, 6) for _ in range(50)]
        y = [rng.randint(1, 6) for _ in range(50)]
        assert kendall_tau(x, y) == pytest.approx(
            sps.kendalltau(x, y, variant="b").statistic, abs=1e-12
        )
        assert spearman_rho(x, y) == pytest.approx(
            sps.spearmanr(x, y).statistic, abs=1e-12
        )

    def test_zero_variance_is_error(self):
        with pytest.raises(StatisticUndefinedError):
            kendall_tau([1, 1, 1], [1, 2, 3])
        with pytest.raises(StatisticUndefinedError):
            spearman_rho([1, 2, 3], [2, 2, 2])

    def test_antisymmetry_under_reversal(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        y = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0]
        y_rev = list(reversed(y))
        assert kendall_tau(x, y_rev) == pytest.approx(-kendall_tau(x, y), abs=1e-12)
        assert spearman_rho(x, y_rev) == pytest.approx(-spearman_rho(x, y), abs=1e-12)

    def test_average_ranks_with_ties(self):
        assert average_ranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]


# --------------------------------------------------------------------------
# ANOVA and Tukey
# --------------------------------------------------------------------------


class TestAnova:
    def test_identical_groups_f_zero_p_one(self):
        result = anova_oneway([[1, 2, 3], [1, 2, 3]])
        assert result.f_statistic == 0.0
        assert result.p_value == 1.0

    def test_hand_decomposition(self):
        result = anova_oneway([[1, 2, 3], [7, 8, 9]])
        # ssb = 54, ssw = 4, F = 54 / 1
        assert result.f_statistic == pytest.approx(54.0, abs=1e-9)
        assert result.df_between == 1
        assert result.df_within == 4

    def test_p_value_matches_quadrature(self):
        # F = 5 with df (2, 27): compare the survival function against
        # direct numerical integration of the density.
        reference = f_sf_by_quadrature(5.0, 2, 27)
        assert reference == pytest.approx(0.014213058423888, abs=1e-9)
        assert sps.f.sf(5.0, 2, 27) == pytest.approx(reference, abs=1e-6)
        groups = [[0.0, 1.0, 2.0], [1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]
        result = anova_oneway(groups)
        assert result.p_value == pytest.approx(
            f_sf_by_quadrature(result.f_statistic, result.df_between, result.df_within),
            abs=1e-6,
        )

    def test_zero_within_variance_everywhere_is_error(self):
        with pytest.raises(StatisticUndefinedError):
            anova_oneway([[2, 2, 2], [5, 5, 5]])

    def test_needs_two_groups_of_two(self):
        with pytest.raises(ValidationError):
            anova_oneway([[1, 2]])
        with pytest.raises(ValidationError):
            anova_oneway([[1, 2], [3]])


class TestTukey:
    def test_identical_groups_nothing_significant(self):
        groups = [[1, 2, 3, 4], [1, 2, 3, 4], [1, 2, 3, 4]]
        comparisons = tukey_hsd(groups)
        assert all(c.mean_difference == 0.0 for c in comparisons)
        assert not any(c.significant for c in comparisons)

    def test_three_group_significant_set_matches_permutation_oracle(self):
        base = [4.8, 5.1, 5.4, 4.9, 5.2, 5.0, 5.3, 4.7]
        groups = [
            base,
            [v + 0.15 for v in base],
            [v + 6.0 for v in base],
        ]
        parametric = {
            (c.group_a, c.group_b) for c in tukey_hsd(groups, 0.05) if c.significant
        }
        permutation = tukey_significant_set_by_permutation(groups, 0.05)
        assert parametric == permutation == {(0, 2), (1, 2)}

    def test_synthetic_usefulness_gap_is_significant(self):
        # Two rating populations with means 8.4 and 4.2 are reliably
        # separated at p < 0.001.
        rng = random.Random(5)
        high = [min(10.0, max(1.0, rng.gauss(8.4, 1.2))) for _ in range(50)]
        low = [min(10.0, max(1.0, rng.gauss(4.2, 1.2))) for _ in range(50)]
        high = [v - (sum(high) / 50 - 8.4) for v in high]
        low = [v - (sum(low) / 50 - 4.2) for v in low]
        comparisons = tukey_hsd([high, low], 0.05)
        assert len(comparisons) == 1
        assert comparisons[0].p_value < 0.001
        assert comparisons[0].significant
        assert abs(comparisons[0].mean_difference) == pytest.approx(4.2, abs=1e-9)


# --------------------------------------------------------------------------
# Trinomial test
# --------------------------------------------------------------------------


class TestTrinomial:
    def test_balanced_counts_give_p_one(self):
        assert trinomial_test(50, 50, 0) == 1.0

    def test_all_ties_degenerate_p_one(self, caplog):
        with caplog.at_level("WARNING"):
            assert trinomial_test(0, 0, 100) == 1.0
        assert any("degenerate" in r.message for r in caplog.records)

    def test_matches_monte_carlo_oracle(self):
        p_exact = trinomial_test(60, 30, 10)
        p_mc = trinomial_mc_oracle(60, 30, 10)
        assert p_exact == pytest.approx(p_mc, abs=0.01)
        assert p_exact < 0.05

    def test_symmetry(self):
        assert trinomial_test(60, 30, 10) == pytest.approx(
            trinomial_test(30, 60, 10), abs=1e-15
        )

    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError):
            trinomial_test(-1, 2, 3)


# --------------------------------------------------------------------------
# Report assembly
# --------------------------------------------------------------------------


class TestAgreementReport:
    def test_report_fields_on_plain_matrix(self):
        rows = [[9, 8, 9], [3, 3, 4], [6, 6, 6], [2, 1, 2]]
        report = agreement_report(matrix_from(rows))
        assert report.n_items == 4
        assert report.n_raters == 3
        assert report.icc is not None and report.icc <= 1.0
        assert report.weighted_kappa is not None and report.weighted_kappa <= 1.0
        assert 0.0 <= report.percent_agreement <= 1.0

    def test_degenerate_components_are_none(self):
        rows = [[5, 5, 5]] * 3
        report = agreement_report(matrix_from(rows))
        assert report.icc is None
        assert report.weighted_kappa is None
        assert report.fleiss_kappa is None
        assert report.percent_agreement == 1.0
