"""Multi-judge evaluation of questions and answers.

A panel of judge instances at different temperatures rates each question on
six aspects in independent calls, then grounds an overall rating on those
six. Answer pairs are compared judge-by-judge with randomized presentation
order, de-randomized before storage, and aggregated by majority.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .domain import (
    ANSWER_ASPECTS,
    ClarifyingQuestion,
    Facet,
    PairwiseVerdict,
    QUESTION_ASPECTS,
    QuestionScores,
    SimulatedAnswer,
    Topic,
)
from .errors import ParseError, ValidationError
from .gateway import Gateway, GenerationParams, parse_integer_rating, render
from . import prompts

DEFAULT_PANEL_TEMPERATURES = (0.2, 0.5, 0.7)
JUDGE_MAX_TOKENS = 256


@dataclass(frozen=True)
class Judge:
    judge_id: str
    temperature: float


@dataclass(frozen=True)
class JudgePanel:
    """An ordered ensemble of judge instances sharing one model."""

    judges: tuple[Judge, ...]
    model_name: str

    def __post_init__(self) -> None:
        if len(self.judges) < 2:
            raise ValidationError("panel needs at least 2 judges")
        ids = [j.judge_id for j in self.judges]
        if len(ids) != len(set(ids)):
            raise ValidationError("judge ids must be unique")


def default_panel(model_name: str) -> JudgePanel:
    names = ("conservative", "balanced", "creative")
    return JudgePanel(
        judges=tuple(
            Judge(judge_id=f"judge-{name}", temperature=temp)
            for name, temp in zip(names, DEFAULT_PANEL_TEMPERATURES)
        ),
        model_name=model_name,
    )


@dataclass(frozen=True)
class PanelQuestionJudgment:
    """All judges' scores for one question plus per-aspect means."""

    question_id: str
    per_judge: tuple[QuestionScores, ...]
    aggregate: dict[str, float]

    def __post_init__(self) -> None:
        if not self.per_judge:
            raise ValidationError("per_judge must be non-empty")
        expected = aggregate_scores(self.per_judge)
        if self.aggregate != expected:
            raise ValidationError("aggregate is not the per-aspect mean of per_judge")


def aggregate_scores(per_judge: tuple[QuestionScores, ...]) -> dict[str, float]:
    aspects = QUESTION_ASPECTS + ("overall_quality",)
    return {
        aspect: sum(getattr(s, aspect) for s in per_judge) / len(per_judge)
        for aspect in aspects
    }


@dataclass(frozen=True)
class PanelPairVerdict:
    """Per-judge verdicts for one (pair, aspect) and their majority outcome.

    ``presented_swapped`` records the randomized presentation orientation;
    the stored verdicts themselves are always canonical.
    """

    pair_id: str
    aspect: str
    per_judge: tuple[PairwiseVerdict, ...]
    outcome: str
    presented_swapped: bool = False

    def __post_init__(self) -> None:
        if self.aspect not in ANSWER_ASPECTS:
            raise ValidationError(f"aspect must be one of {ANSWER_ASPECTS}")
        for verdict in self.per_judge:
            if verdict.aspect != self.aspect:
                raise ValidationError("per_judge verdicts must match the pair aspect")
        if self.outcome != aggregate_pair(list(self.per_judge)):
            raise ValidationError("outcome does not follow the majority rule")


def rate_question_aspect(
    gateway: Gateway,
    topic: Topic,
    question: ClarifyingQuestion,
    aspect: str,
    judge: Judge,
    *,
    model_name: str,
) -> int:
    """One judge's 1..10 rating of one aspect, in an independent call."""
    if aspect not in QUESTION_ASPECTS:
        raise ValidationError(
            f"aspect must be one of {QUESTION_ASPECTS} (overall is rated separately)"
        )
    prompt = render(
        prompts.ASPECT_RATING,
        prompts.aspect_rating_bindings(aspect, topic.initial_request, question.text),
    )
    params = GenerationParams(
        model_name=model_name, temperature=judge.temperature, max_tokens=JUDGE_MAX_TOKENS
    )
    response = gateway.complete(prompt, params, template_id="aspect_rating")
    return parse_integer_rating(response)


def rate_overall_quality(
    gateway: Gateway,
    topic: Topic,
    question: ClarifyingQuestion,
    other_ratings: dict[str, int],
    judge: Judge,
    *,
    model_name: str,
) -> int:
    """Overall 1..10 rating grounded on the judge's six aspect ratings."""
    missing = [a for a in QUESTION_ASPECTS if a not in other_ratings]
    if missing:
        raise ValidationError(f"missing aspect rating(s): {', '.join(missing)}")
    prompt = render(
        prompts.OVERALL_RATING,
        {
            "original_query": topic.initial_request,
            "system_question": question.text,
            "other_ratings": prompts.format_other_ratings(other_ratings),
        },
    )
    params = GenerationParams(
        model_name=model_name, temperature=judge.temperature, max_tokens=JUDGE_MAX_TOKENS
    )
    response = gateway.complete(prompt, params, template_id="overall_rating")
    return parse_integer_rating(response)


def judge_question(
    gateway: Gateway,
    topic: Topic,
    question: ClarifyingQuestion,
    panel: JudgePanel,
) -> PanelQuestionJudgment:
    """Collect six aspect ratings plus overall from every panel judge."""
    per_judge: list[QuestionScores] = []
    for judge in panel.judges:
        ratings = {
            aspect: rate_question_aspect(
                gateway, topic, question, aspect, judge, model_name=panel.model_name
            )
            for aspect in QUESTION_ASPECTS
        }
        overall = rate_overall_quality(
            gateway, topic, question, ratings, judge, model_name=panel.model_name
        )
        per_judge.append(
            QuestionScores(
                judge_id=judge.judge_id,
                judge_temperature=judge.temperature,
                overall_quality=overall,
                **ratings,
            )
        )
    scores = tuple(per_judge)
    return PanelQuestionJudgment(
        question_id=question.question_id,
        per_judge=scores,
        aggregate=aggregate_scores(scores),
    )


def parse_verdict(text: str) -> str:
    """Map a judge response onto A / B / equal.

    Accepts a bare verdict line, or scans for a standalone capital A/B or the
    words equal/tie; lowercase 'a'/'b' are ignored as likely articles.
    """
    first_line = text.strip().splitlines()[0].strip(" .!'\"()") if text.strip() else ""
    if first_line.lower() in ("a", "b", "equal", "tie"):
        token = first_line.lower()
        return {"a": "A", "b": "B", "equal": "equal", "tie": "equal"}[token]
    letter = re.search(r"\b([AB])\b", text)
    word = re.search(r"\b(equal|tie)\b", text, re.I)
    candidates = [m for m in (letter, word) if m]
    if not candidates:
        raise ParseError(f"no A/B/equal verdict in response: {text!r}", raw_text=text)
    match = min(candidates, key=lambda m: m.start())
    token = match.group(1).lower()
    return {"a": "A", "b": "B", "equal": "equal", "tie": "equal"}[token]


def compare_answers(
    gateway: Gateway,
    topic: Topic,
    facet: Facet,
    question: ClarifyingQuestion,
    answer_a: SimulatedAnswer,
    answer_b: SimulatedAnswer,
    aspect: str,
    judge: Judge,
    *,
    model_name: str,
    swap_presentation: bool = False,
) -> PairwiseVerdict:
    """Compare two answers on one aspect with one judge.

    ``swap_presentation`` shows the pair in (B, A) order; the returned
    verdict is always expressed in the caller's canonical (A, B) orientation.
    """
    if aspect not in ANSWER_ASPECTS:
        raise ValidationError(f"aspect must be one of {ANSWER_ASPECTS}")
    if answer_a.question_id != question.question_id or (
        answer_b.question_id != question.question_id
    ):
        raise ValidationError("both answers must address the given question")
    meta = prompts.ANSWER_ASPECT_DEFINITIONS[aspect]
    first, second = (answer_b, answer_a) if swap_presentation else (answer_a, answer_b)
    prompt = render(
        prompts.PAIRWISE_COMPARISON,
        {
            "query": topic.initial_request,
            "facet": facet.description,
            "question": question.text,
            "answer_a": first.text,
            "answer_b": second.text,
            "aspect_title": meta["title"],
            "aspect_definition": meta["definition"],
        },
    )
    params = GenerationParams(
        model_name=model_name, temperature=judge.temperature, max_tokens=16
    )
    response = gateway.complete(prompt, params, template_id="pairwise_comparison")
    verdict = parse_verdict(response)
    if swap_presentation and verdict in ("A", "B"):
        verdict = "B" if verdict == "A" else "A"
    return PairwiseVerdict(aspect=aspect, verdict=verdict, judge_id=judge.judge_id)


def presentation_swap(seed: int, pair_id: str) -> bool:
    """Deterministic per-pair coin flip for presentation order."""
    return random.Random(f"{seed}:{pair_id}").random() < 0.5


def aggregate_pair(per_judge: list[PairwiseVerdict]) -> str:
    """Majority outcome over judge verdicts.

    A wins with a strict majority of 'A' verdicts, B symmetrically; a
    majority of 'equal' is a tie, and a full three-way split falls back to
    tie as the conservative completion.
    """
    if not per_judge:
        raise ValidationError("need at least one verdict")
    n = len(per_judge)
    counts = {"A": 0, "B": 0, "equal": 0}
    for verdict in per_judge:
        counts[verdict.verdict] += 1
    majority = n // 2 + 1
    if counts["A"] >= majority:
        return "A_wins"
    if counts["B"] >= majority:
        return "B_wins"
    return "tie"


def _decode_panel_question_judgment(data: dict) -> PanelQuestionJudgment:
    from .domain import QuestionScores

    return PanelQuestionJudgment(
        question_id=data["question_id"],
        per_judge=tuple(QuestionScores(**s) for s in data["per_judge"]),
        aggregate=dict(data["aggregate"]),
    )


def _decode_panel_pair_verdict(data: dict) -> PanelPairVerdict:
    return PanelPairVerdict(
        pair_id=data["pair_id"],
        aspect=data["aspect"],
        per_judge=tuple(PairwiseVerdict(**v) for v in data["per_judge"]),
        outcome=data["outcome"],
        presented_swapped=data.get("presented_swapped", False),
    )


def _register_codecs() -> None:
    from dataclasses import fields as dc_fields

    from . import ingest

    def encode_judgment(j: PanelQuestionJudgment) -> dict:
        return {
            "question_id": j.question_id,
            "per_judge": [
                {f.name: getattr(s, f.name) for f in dc_fields(s)} for s in j.per_judge
            ],
            "aggregate": dict(j.aggregate),
        }

    def encode_pair(p: PanelPairVerdict) -> dict:
        return {
            "pair_id": p.pair_id,
            "aspect": p.aspect,
            "per_judge": [
                {f.name: getattr(v, f.name) for f in dc_fields(v)} for v in p.per_judge
            ],
            "outcome": p.outcome,
            "presented_swapped": p.presented_swapped,
        }

    ingest.register_record_type(
        "panel_question_judgment",
        PanelQuestionJudgment,
        encode=encode_judgment,
        decode=_decode_panel_question_judgment,
    )
    ingest.register_record_type(
        "panel_pair_verdict",
        PanelPairVerdict,
        encode=encode_pair,
        decode=_decode_panel_pair_verdict,
    )


_register_codecs()


def judge_pair(
    gateway: Gateway,
    topic: Topic,
    facet: Facet,
    question: ClarifyingQuestion,
    answer_a: SimulatedAnswer,
    answer_b: SimulatedAnswer,
    aspect: str,
    panel: JudgePanel,
    *,
    pair_id: str,
    seed: int = 0,
) -> PanelPairVerdict:
    """Full panel comparison for one (pair, aspect)."""
    swap = presentation_swap(seed, pair_id)
    verdicts = tuple(
        compare_answers(
            gateway, topic, facet, question, answer_a, answer_b, aspect, judge,
            model_name=panel.model_name, swap_presentation=swap,
        )
        for judge in panel.judges
    )
    return PanelPairVerdict(
        pair_id=pair_id,
        aspect=aspect,
        per_judge=verdicts,
        outcome=aggregate_pair(list(verdicts)),
        presented_swapped=swap,
    )
