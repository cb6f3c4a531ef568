"""Candidate scoring and top-k selection.

Each candidate gets a relevance score R and a clarification score L from one
judge call; the combined score is the convex combination
``alpha * R + (1 - alpha) * L`` and the top k candidates per pool survive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .domain import ClarifyingQuestion, Topic
from .errors import ParseError, ValidationError
from .gateway import Gateway, GenerationParams, render
from .generation import QuestionPool
from . import ingest, prompts

DEFAULT_ALPHA = 0.4
DEFAULT_TOP_K = 10
SCORING_TEMPERATURE = 0.7


@dataclass(frozen=True)
class FilterScore:
    """Relevance/clarification judgment for one candidate question."""

    question_id: str
    relevance: float
    clarification: float
    alpha: float = DEFAULT_ALPHA
    combined: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.question_id:
            raise ValidationError("question_id must be non-empty")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha out of range [0, 1]: {self.alpha}")
        for name in ("relevance", "clarification"):
            value = getattr(self, name)
            if not 0.0 <= value <= 10.0:
                raise ValidationError(f"{name} out of range [0, 10]: {value}")
        object.__setattr__(
            self,
            "combined",
            self.alpha * self.relevance + (1.0 - self.alpha) * self.clarification,
        )


_LABELED_RE = {
    "clarification": re.compile(r"clarification\s*[:=]?\s*(\d+(?:\.\d+)?)", re.I),
    "relevance": re.compile(r"on[\s-]?topic\s*[:=]?\s*(\d+(?:\.\d+)?)", re.I),
}
_NUMBER_RE = re.compile(r"(?<![\d.])(\d+(?:\.\d+)?)(?![\d.])")


def parse_filter_scores(text: str) -> tuple[float, float]:
    """Extract (relevance, clarification) from a scoring response.

    Labeled values win; without labels, the first two standalone numbers are
    taken in prompt order (clarification first, relevance second).
    """
    clar_match = _LABELED_RE["clarification"].search(text)
    rel_match = _LABELED_RE["relevance"].search(text)
    if clar_match and rel_match:
        clarification = float(clar_match.group(1))
        relevance = float(rel_match.group(1))
    else:
        numbers = _NUMBER_RE.findall(text)
        if len(numbers) < 2:
            raise ParseError(
                f"scoring response lacks two numeric scores: {text!r}", raw_text=text
            )
        clarification, relevance = float(numbers[0]), float(numbers[1])
    for name, value in (("relevance", relevance), ("clarification", clarification)):
        if not 0.0 <= value <= 10.0:
            raise ParseError(
                f"{name} score {value} outside 0..10: {text!r}", raw_text=text
            )
    return relevance, clarification


def score_candidate(
    gateway: Gateway,
    topic: Topic,
    question: ClarifyingQuestion,
    *,
    model_name: str,
    alpha: float = DEFAULT_ALPHA,
) -> FilterScore:
    """Judge one candidate's relevance and clarification potential."""
    prompt = render(
        prompts.FILTER_SCORING,
        {"query": topic.initial_request, "question": question.text},
    )
    params = GenerationParams(
        model_name=model_name, temperature=SCORING_TEMPERATURE, max_tokens=256
    )
    response = gateway.complete(prompt, params, template_id="filter_scoring")
    relevance, clarification = parse_filter_scores(response)
    return FilterScore(
        question_id=question.question_id,
        relevance=relevance,
        clarification=clarification,
        alpha=alpha,
    )


def select_top_k(
    pool: QuestionPool,
    scores: list[FilterScore],
    k: int = DEFAULT_TOP_K,
) -> list[ClarifyingQuestion]:
    """Keep the best-scoring min(k, pool size) questions, deterministically.

    Sort order: combined score descending, then clarification descending,
    then question_id ascending, so reruns produce identical selections.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    by_id: dict[str, FilterScore] = {}
    for score in scores:
        if score.question_id in by_id:
            raise ValidationError(f"duplicate score for question {score.question_id}")
        by_id[score.question_id] = score
    for candidate in pool.candidates:
        if candidate.question_id not in by_id:
            raise ValidationError(f"missing score for question {candidate.question_id}")

    ranked = sorted(
        pool.candidates,
        key=lambda q: (
            -by_id[q.question_id].combined,
            -by_id[q.question_id].clarification,
            q.question_id,
        ),
    )
    return ranked[: min(k, len(ranked))]


ingest.register_record_type(
    "filter_score",
    FilterScore,
    decode=lambda d: FilterScore(
        question_id=d["question_id"],
        relevance=d["relevance"],
        clarification=d["clarification"],
        alpha=d["alpha"],
    ),
)
