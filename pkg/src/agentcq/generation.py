"""Candidate clarifying-question generation.

Three strategies fill per-topic question pools: facet-based (derive facets,
then one question per facet), temperature-variation (k sets generated on a
rising temperature schedule), and a fixed-temperature baseline.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .domain import ClarifyingQuestion, Facet, QuestionGenParams, Topic
from .errors import ParseError, ValidationError
from .gateway import Gateway, GenerationParams, render
from . import prompts

logger = logging.getLogger(__name__)

POOL_STRATEGIES = ("facet_based", "temperature_variation", "baseline")

DEFAULT_N_FACETS = 40
DEFAULT_N_SETS = 3
DEFAULT_SET_SIZE = 10
DEFAULT_BASELINE_N = 10

FACET_QUESTION_TEMPERATURE = 0.7
FACET_QUESTION_TOP_P = 0.95
BASELINE_TEMPERATURE = 0.7


def temperature_for_set(set_index: int) -> float:
    """Rising per-set sampling temperature, capped at 0.9."""
    if set_index < 1:
        raise ValidationError("set_index must be >= 1")
    return min(0.9, 0.5 + (set_index - 1) * 0.1)


def normalize_question_text(text: str) -> str:
    """Key used for exact-match deduplication: case-folded, trimmed, with
    terminal punctuation stripped."""
    return text.strip().casefold().rstrip(".!?").rstrip()


_ITEM_LINE_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|[-*•]\s+)?(.*\S)\s*$")


def parse_list_response(text: str) -> list[str]:
    """Parse a model list response: numbered, dashed, or bare lines."""
    items: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _ITEM_LINE_RE.match(line)
        if match:
            items.append(match.group(1))
    return items


def dedupe_questions(
    candidates: list[ClarifyingQuestion],
) -> tuple[ClarifyingQuestion, ...]:
    """Drop candidates whose normalized text repeats; first occurrence wins."""
    seen: set[str] = set()
    kept: list[ClarifyingQuestion] = []
    for candidate in candidates:
        key = normalize_question_text(candidate.text)
        if key not in seen:
            seen.add(key)
            kept.append(candidate)
    return tuple(kept)


@dataclass(frozen=True)
class QuestionPool:
    """An ordered, deduplicated pool of candidates from one strategy."""

    topic_id: str
    candidates: tuple[ClarifyingQuestion, ...]
    strategy: str

    def __post_init__(self) -> None:
        if self.strategy not in POOL_STRATEGIES:
            raise ValidationError(f"strategy must be one of {POOL_STRATEGIES}")
        keys = [normalize_question_text(c.text) for c in self.candidates]
        if len(keys) != len(set(keys)):
            raise ValidationError("pool candidates must be deduplicated by normalized text")
        for candidate in self.candidates:
            if candidate.topic_id != self.topic_id:
                raise ValidationError(
                    f"candidate {candidate.question_id} belongs to topic "
                    f"{candidate.topic_id}, pool is for {self.topic_id}"
                )
            if candidate.source != self.strategy:
                raise ValidationError(
                    f"candidate {candidate.question_id} has source "
                    f"{candidate.source}, pool strategy is {self.strategy}"
                )


def generate_facets(
    gateway: Gateway,
    topic: Topic,
    n_facets: int = DEFAULT_N_FACETS,
    *,
    model_name: str,
    temperature: float = FACET_QUESTION_TEMPERATURE,
) -> list[Facet]:
    """Derive up to ``n_facets`` distinct facets for a topic in one call."""
    if n_facets < 1:
        raise ValidationError("n_facets must be >= 1")
    prompt = render(
        prompts.FACET_GENERATION,
        {"query": topic.initial_request, "n_facets": str(n_facets)},
    )
    params = GenerationParams(
        model_name=model_name, temperature=temperature, max_tokens=2048
    )
    response = gateway.complete(prompt, params, template_id="facet_generation")
    items = parse_list_response(response)
    if not items:
        raise ParseError(
            f"facet response for topic {topic.topic_id} contained no items",
            raw_text=response,
        )
    seen: set[str] = set()
    descriptions: list[str] = []
    for item in items:
        key = item.strip().casefold()
        if key and key not in seen:
            seen.add(key)
            descriptions.append(item.strip())
    if len(descriptions) > n_facets:
        logger.warning(
            "topic %s: facet response overflow (%d items for %d requested); truncating",
            topic.topic_id, len(descriptions), n_facets,
        )
        descriptions = descriptions[:n_facets]
    return [
        Facet(
            facet_id=f"{topic.topic_id}-f{idx:02d}",
            topic_id=topic.topic_id,
            description=description,
        )
        for idx, description in enumerate(descriptions, start=1)
    ]


def question_from_facet(
    gateway: Gateway,
    topic: Topic,
    facet: Facet,
    *,
    model_name: str,
    question_id: str | None = None,
) -> ClarifyingQuestion:
    """Generate one facet-targeted clarifying question."""
    if facet.topic_id != topic.topic_id:
        raise ValidationError(
            f"facet {facet.facet_id} belongs to topic {facet.topic_id}, "
            f"not {topic.topic_id}"
        )
    prompt = render(
        prompts.FACET_QUESTION,
        {"query": topic.initial_request, "facet": facet.description},
    )
    params = GenerationParams(
        model_name=model_name,
        temperature=FACET_QUESTION_TEMPERATURE,
        top_p=FACET_QUESTION_TOP_P,
        max_tokens=256,
    )
    response = gateway.complete(prompt, params, template_id="facet_question")
    items = parse_list_response(response)
    if not items:
        raise ParseError(
            f"empty question response for facet {facet.facet_id}", raw_text=response
        )
    return ClarifyingQuestion(
        question_id=question_id or f"{topic.topic_id}-fq-{facet.facet_id}",
        topic_id=topic.topic_id,
        text=items[0],
        source="facet_based",
        gen_params=QuestionGenParams(
            model_name=model_name,
            temperature=FACET_QUESTION_TEMPERATURE,
            facet_id=facet.facet_id,
        ),
    )


def generate_facet_pool(
    gateway: Gateway,
    topic: Topic,
    *,
    facet_model: str,
    question_model: str,
    n_facets: int = DEFAULT_N_FACETS,
) -> QuestionPool:
    """Full facet-based strategy: facets first, then one question per facet."""
    facets = generate_facets(gateway, topic, n_facets, model_name=facet_model)
    candidates = [
        question_from_facet(gateway, topic, facet, model_name=question_model)
        for facet in facets
    ]
    return QuestionPool(
        topic_id=topic.topic_id,
        candidates=dedupe_questions(candidates),
        strategy="facet_based",
    )


def generate_temperature_sets(
    gateway: Gateway,
    topic: Topic,
    k: int = DEFAULT_N_SETS,
    set_size: int = DEFAULT_SET_SIZE,
    *,
    model_name: str,
) -> QuestionPool:
    """Generate ``k`` question sets on the rising temperature schedule.

    A failed set aborts the whole pool rather than silently truncating it.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if set_size < 1:
        raise ValidationError("set_size must be >= 1")
    candidates: list[ClarifyingQuestion] = []
    for set_index in range(1, k + 1):
        temperature = temperature_for_set(set_index)
        prompt = render(
            prompts.QUESTION_SET,
            {"query": topic.initial_request, "set_size": str(set_size)},
        )
        params = GenerationParams(
            model_name=model_name, temperature=temperature, max_tokens=1024
        )
        response = gateway.complete(prompt, params, template_id="question_set")
        items = parse_list_response(response)
        if not items:
            raise ParseError(
                f"set {set_index} for topic {topic.topic_id} produced no questions",
                raw_text=response,
            )
        if len(items) > set_size:
            logger.warning(
                "topic %s set %d: %d items for %d requested; keeping the first %d",
                topic.topic_id, set_index, len(items), set_size, set_size,
            )
            items = items[:set_size]
        for position, text in enumerate(items, start=1):
            candidates.append(
                ClarifyingQuestion(
                    question_id=f"{topic.topic_id}-t{set_index}-{position:02d}",
                    topic_id=topic.topic_id,
                    text=text,
                    source="temperature_variation",
                    gen_params=QuestionGenParams(
                        model_name=model_name,
                        temperature=temperature,
                        set_index=set_index,
                    ),
                )
            )
    return QuestionPool(
        topic_id=topic.topic_id,
        candidates=dedupe_questions(candidates),
        strategy="temperature_variation",
    )


def generate_baseline(
    gateway: Gateway,
    topic: Topic,
    n: int = DEFAULT_BASELINE_N,
    *,
    model_name: str,
) -> QuestionPool:
    """Fixed-temperature single-set baseline."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    prompt = render(
        prompts.QUESTION_SET,
        {"query": topic.initial_request, "set_size": str(n)},
    )
    params = GenerationParams(
        model_name=model_name, temperature=BASELINE_TEMPERATURE, max_tokens=1024
    )
    response = gateway.complete(prompt, params, template_id="question_set")
    items = parse_list_response(response)
    if not items:
        raise ParseError(
            f"baseline response for topic {topic.topic_id} produced no questions",
            raw_text=response,
        )
    if len(items) > n:
        logger.warning(
            "topic %s baseline: %d items for %d requested; keeping the first %d",
            topic.topic_id, len(items), n, n,
        )
        items = items[:n]
    candidates = [
        ClarifyingQuestion(
            question_id=f"{topic.topic_id}-b-{position:02d}",
            topic_id=topic.topic_id,
            text=text,
            source="baseline",
            gen_params=QuestionGenParams(
                model_name=model_name, temperature=BASELINE_TEMPERATURE
            ),
        )
        for position, text in enumerate(items, start=1)
    ]
    return QuestionPool(
        topic_id=topic.topic_id,
        candidates=dedupe_questions(candidates),
        strategy="baseline",
    )
