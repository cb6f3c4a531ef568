"""Rendered summary tables over stage artifacts.

Every renderer returns a deterministic tab-separated table with a header
row, so report output is diff-able across runs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from statistics import mean, pstdev

from .analysis import AnalysisProfile, QUESTION_PATTERNS, RESPONSE_TYPES, grade_label
from .crowdllm import PanelPairVerdict, PanelQuestionJudgment
from .domain import ALL_QUESTION_ASPECTS, ANSWER_ASPECTS, RatingsMatrix
from .errors import StatisticUndefinedError
from . import ingest, prompts, stats

GROUP_ORDER = ("facet_based", "temperature_variation", "baseline", "human")


@dataclass(frozen=True)
class AgreementRow:
    """Panel reliability for one (question group, aspect)."""

    group: str
    aspect: str
    icc: float | None
    weighted_kappa: float | None
    weighted_kappa_pairs: dict[str, float]
    percent_agreement: float
    n_items: int
    n_raters: int


@dataclass(frozen=True)
class PairAgreementRow:
    """Panel reliability for one answer-comparison aspect."""

    aspect: str
    fleiss_kappa: float | None
    percent_agreement: float
    n_pairs: int


@dataclass(frozen=True)
class CorrelationRow:
    aspect: str
    kendall_tau: float | None
    spearman_rho: float | None
    n_items: int


@dataclass(frozen=True)
class PairwiseOutcomeRow:
    aspect: str
    a_wins_pct: float
    b_wins_pct: float
    tie_pct: float
    trinomial_p: float
    significant: bool
    n_pairs: int


def _fmt(value: float | None, places: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{places}f}"


# --------------------------------------------------------------------------
# Agreement over question judgments
# --------------------------------------------------------------------------


def agreement_rows(
    judgments: list[PanelQuestionJudgment],
    group_of: dict[str, str],
) -> list[AgreementRow]:
    """One row per (group, aspect) from per-judge rating matrices."""
    by_group: dict[str, list[PanelQuestionJudgment]] = {}
    for judgment in judgments:
        group = group_of.get(judgment.question_id, "unknown")
        by_group.setdefault(group, []).append(judgment)

    rows: list[AgreementRow] = []
    for group in sorted(by_group, key=_group_sort_key):
        group_judgments = sorted(by_group[group], key=lambda j: j.question_id)
        if len(group_judgments) < 2:
            continue
        judge_ids = [s.judge_id for s in group_judgments[0].per_judge]
        for aspect in ALL_QUESTION_ASPECTS:
            matrix = RatingsMatrix.from_rows(
                items=[j.question_id for j in group_judgments],
                raters=judge_ids,
                scores=[
                    [getattr(score, aspect) for score in j.per_judge]
                    for j in group_judgments
                ],
                scale_min=1,
                scale_max=10,
            )
            try:
                icc_value: float | None = stats.icc(matrix)
            except StatisticUndefinedError:
                icc_value = None
            pair_values: dict[str, float] = {}
            columns = list(zip(*matrix.scores))
            for a in range(len(judge_ids)):
                for b in range(a + 1, len(judge_ids)):
                    try:
                        pair_values[f"{judge_ids[a]}|{judge_ids[b]}"] = stats.weighted_kappa(
                            columns[a], columns[b], 1, 10, weights="quadratic"
                        )
                    except StatisticUndefinedError:
                        continue
            rows.append(
                AgreementRow(
                    group=group,
                    aspect=aspect,
                    icc=icc_value,
                    weighted_kappa=(
                        sum(pair_values.values()) / len(pair_values)
                        if pair_values
                        else None
                    ),
                    weighted_kappa_pairs=pair_values,
                    percent_agreement=stats.percent_agreement(matrix.scores),
                    n_items=matrix.n_items,
                    n_raters=matrix.n_raters,
                )
            )
    return rows


def _group_sort_key(group: str) -> tuple[int, str]:
    try:
        return (GROUP_ORDER.index(group), group)
    except ValueError:
        return (len(GROUP_ORDER), group)


def render_agreement_table(rows: list[AgreementRow]) -> str:
    """Aspects down the side, one (ICC, W-k) column pair per question group."""
    groups = sorted({r.group for r in rows}, key=_group_sort_key)
    cell: dict[tuple[str, str], AgreementRow] = {(r.group, r.aspect): r for r in rows}
    header = ["aspect"]
    for group in groups:
        header += [f"{group}:icc", f"{group}:w_kappa"]
    lines = ["\t".join(header)]
    for aspect in ALL_QUESTION_ASPECTS:
        cells = [aspect]
        for group in groups:
            row = cell.get((group, aspect))
            cells += (
                [_fmt(row.icc), _fmt(row.weighted_kappa)] if row else ["n/a", "n/a"]
            )
        lines.append("\t".join(cells))
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Agreement over answer pair verdicts
# --------------------------------------------------------------------------

_VERDICT_CATEGORIES = ("A", "B", "equal")


def pair_agreement_rows(verdicts: list[PanelPairVerdict]) -> list[PairAgreementRow]:
    by_aspect: dict[str, list[PanelPairVerdict]] = {}
    for verdict in verdicts:
        by_aspect.setdefault(verdict.aspect, []).append(verdict)
    rows = []
    for aspect in ANSWER_ASPECTS:
        group = sorted(by_aspect.get(aspect, []), key=lambda v: v.pair_id)
        if not group:
            continue
        n_raters = len(group[0].per_judge)
        counts = [
            [
                sum(1 for v in item.per_judge if v.verdict == category)
                for category in _VERDICT_CATEGORIES
            ]
            for item in group
        ]
        try:
            fleiss: float | None = stats.fleiss_kappa(counts, n_raters)
        except StatisticUndefinedError:
            fleiss = None
        grid = [[v.verdict for v in item.per_judge] for item in group]
        rows.append(
            PairAgreementRow(
                aspect=aspect,
                fleiss_kappa=fleiss,
                percent_agreement=stats.percent_agreement(grid),
                n_pairs=len(group),
            )
        )
    return rows


def render_pair_agreement_table(rows: list[PairAgreementRow]) -> str:
    lines = ["aspect\tfleiss_kappa\tpct_agreement\tn_pairs"]
    for row in rows:
        lines.append(
            "\t".join(
                [
                    row.aspect,
                    _fmt(row.fleiss_kappa),
                    f"{100 * row.percent_agreement:.0f}%",
                    str(row.n_pairs),
                ]
            )
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Aspect-to-overall correlations
# --------------------------------------------------------------------------


def correlation_rows(judgments: list[PanelQuestionJudgment]) -> list[CorrelationRow]:
    """Correlation of each aspect's panel mean with the overall panel mean."""
    ordered = sorted(judgments, key=lambda j: j.question_id)
    overall = [j.aggregate["overall_quality"] for j in ordered]
    rows = []
    for aspect in ALL_QUESTION_ASPECTS[:-1]:
        values = [j.aggregate[aspect] for j in ordered]
        try:
            tau: float | None = stats.kendall_tau(values, overall)
            rho: float | None = stats.spearman_rho(values, overall)
        except StatisticUndefinedError:
            tau = rho = None
        rows.append(
            CorrelationRow(
                aspect=aspect, kendall_tau=tau, spearman_rho=rho, n_items=len(ordered)
            )
        )
    return rows


def render_correlation_table(rows: list[CorrelationRow]) -> str:
    lines = ["aspect\tkendall_tau\tspearman_rho\tn"]
    for row in rows:
        lines.append(
            "\t".join(
                [
                    row.aspect,
                    _fmt(row.kendall_tau),
                    _fmt(row.spearman_rho),
                    str(row.n_items),
                ]
            )
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Length / readability and categorical distributions
# --------------------------------------------------------------------------


def profiles_by_group(
    profiles: list[AnalysisProfile], group_of: dict[str, str]
) -> dict[str, list[AnalysisProfile]]:
    out: dict[str, list[AnalysisProfile]] = {}
    for profile in profiles:
        group = group_of.get(profile.question_id, "unknown")
        out.setdefault(group, []).append(profile)
    return out


def render_length_table(groups: dict[str, list[AnalysisProfile]]) -> str:
    lines = ["group\tmean_words\tstd_words\treading_ease\tgrade"]
    for group in sorted(groups, key=_group_sort_key):
        profiles = groups[group]
        if not profiles:
            continue
        word_counts = [p.word_count for p in profiles]
        lines.append(
            "\t".join(
                [
                    group,
                    f"{mean(word_counts):.2f}",
                    f"{pstdev(word_counts):.2f}" if len(word_counts) > 1 else "0.00",
                    f"{mean(p.flesch_reading_ease for p in profiles):.2f}",
                    grade_label(mean(p.fk_grade for p in profiles)),
                ]
            )
        )
    return "\n".join(lines)


_DIMENSIONS = {
    "patterns": ("pattern", QUESTION_PATTERNS),
    "response_types": ("response_type", RESPONSE_TYPES),
    "categories": ("category", prompts.QUESTION_CATEGORIES),
}


def render_distribution_table(
    groups: dict[str, list[AnalysisProfile]], dimension: str
) -> str:
    """Percentage share of each label per group for one analysis dimension."""
    attr, labels = _DIMENSIONS[dimension]
    group_names = sorted(groups, key=_group_sort_key)
    lines = ["\t".join([attr] + list(group_names))]
    counters = {
        g: Counter(getattr(p, attr) for p in groups[g]) for g in group_names
    }
    for label in labels:
        cells = [label]
        for g in group_names:
            total = sum(counters[g].values())
            share = 100.0 * counters[g].get(label, 0) / total if total else 0.0
            cells.append(f"{share:.2f}")
        lines.append("\t".join(cells))
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Pairwise outcomes
# --------------------------------------------------------------------------


def pairwise_outcome_rows(
    verdicts: list[PanelPairVerdict], alpha_sig: float = 0.05
) -> list[PairwiseOutcomeRow]:
    by_aspect: dict[str, list[PanelPairVerdict]] = {}
    for verdict in verdicts:
        by_aspect.setdefault(verdict.aspect, []).append(verdict)
    rows = []
    for aspect in ANSWER_ASPECTS:
        group = by_aspect.get(aspect, [])
        if not group:
            continue
        outcomes = Counter(v.outcome for v in group)
        wins_a = outcomes.get("A_wins", 0)
        wins_b = outcomes.get("B_wins", 0)
        ties = outcomes.get("tie", 0)
        total = len(group)
        p_value = stats.trinomial_test(wins_a, wins_b, ties)
        rows.append(
            PairwiseOutcomeRow(
                aspect=aspect,
                a_wins_pct=100.0 * wins_a / total,
                b_wins_pct=100.0 * wins_b / total,
                tie_pct=100.0 * ties / total,
                trinomial_p=p_value,
                significant=p_value < alpha_sig,
                n_pairs=total,
            )
        )
    return rows


def render_pairwise_table(rows: list[PairwiseOutcomeRow]) -> str:
    lines = ["aspect\thuman_wins\tllm_wins\ttie\ttrinomial_p\tsignificant\tn"]
    for row in rows:
        lines.append(
            "\t".join(
                [
                    row.aspect,
                    f"{row.a_wins_pct:.2f}",
                    f"{row.b_wins_pct:.2f}",
                    f"{row.tie_pct:.2f}",
                    f"{row.trinomial_p:.4f}",
                    "*" if row.significant else "",
                    str(row.n_pairs),
                ]
            )
        )
    return "\n".join(lines)


def _register_codecs() -> None:
    def decode_agreement(d: dict) -> AgreementRow:
        return AgreementRow(
            group=d["group"],
            aspect=d["aspect"],
            icc=d["icc"],
            weighted_kappa=d["weighted_kappa"],
            weighted_kappa_pairs=dict(d["weighted_kappa_pairs"]),
            percent_agreement=d["percent_agreement"],
            n_items=d["n_items"],
            n_raters=d["n_raters"],
        )

    ingest.register_record_type("agreement_row", AgreementRow, decode=decode_agreement)
    ingest.register_record_type("pair_agreement_row", PairAgreementRow)
    ingest.register_record_type("correlation_row", CorrelationRow)
    ingest.register_record_type("pairwise_outcome_row", PairwiseOutcomeRow)


_register_codecs()
