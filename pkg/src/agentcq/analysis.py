"""Surface-level question analysis.

Pattern matching, elicited-response-type rules, and readability run on the
raw question string; only category classification goes through a model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .domain import ClarifyingQuestion, Topic
from .errors import ParseError, ValidationError
from .gateway import Gateway, GenerationParams, render
from . import prompts

QUESTION_PATTERNS = (
    "are_you_looking_for_x",
    "are_you_x",
    "what_specific",
    "which_specific",
    "do_you_need_want_have",
    "would_you_like",
    "is_there",
    "how_x",
    "other",
)

RESPONSE_TYPES = ("yes_no", "multiple_choice", "open_ended", "factual")

# Prefix patterns in precedence order: the most specific compound phrasings
# are tried before the shorter prefixes they extend.
_PATTERN_RULES: tuple[tuple[str, re.Pattern], ...] = (
    ("are_you_looking_for_x", re.compile(r"^are you looking for\b")),
    ("are_you_x", re.compile(r"^are you\b")),
    ("what_specific", re.compile(r"^what specific\b")),
    ("which_specific", re.compile(r"^which specific\b")),
    ("do_you_need_want_have", re.compile(r"^do you (?:need|want|have)\b")),
    ("would_you_like", re.compile(r"^would you like\b")),
    ("is_there", re.compile(r"^is there\b")),
    ("how_x", re.compile(r"^how\b")),
)

_AUXILIARIES = frozenset(
    "are is do does did would will can could should have has".split()
)
_FACTUAL_HEADS = frozenset("when where who which".split())

# Tokens that may introduce an alternatives list ("referring to X or Y",
# "looking for X or Y"); a bare "or" with none of these before it is treated
# as part of a noun phrase, not a choice list.
_CHOICE_CUES = frozenset(
    (
        "for", "to", "in", "of", "on", "about", "between", "with", "like",
        "mean", "want", "need", "prefer", "looking", "referring", "interested",
        "considering", "buy", "compare", "choose", "select", "know", "find",
        "is", "are",
    )
)
_CHOICE_CUE_WINDOW = 8

_ENUMERATED_RE = re.compile(r"(?:^|\s)(?:\(?[1-9][.)]|\(?[a-e]\))\s")


def _words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text)


def match_pattern(question: str) -> str:
    """First matching surface pattern over case-folded text, else ``other``."""
    if not question or not question.strip():
        raise ValidationError("question text must be non-empty")
    folded = question.strip().casefold()
    for name, rule in _PATTERN_RULES:
        if rule.search(folded):
            return name
    return "other"


def _has_choice_list(folded: str) -> bool:
    if len(_ENUMERATED_RE.findall(folded)) >= 2:
        return True
    if ", or " in folded:
        return True
    for match in re.finditer(r"\bor\b", folded):
        before = _words(folded[: match.start()])
        if len(before) < 2:
            continue
        window = before[-(_CHOICE_CUE_WINDOW + 1):-1]
        if any(token in _CHOICE_CUES for token in window):
            return True
    return False


def classify_response_type(question: str) -> str:
    """Rule-based expected-response type.

    Explicit alternatives make a question multiple choice even when it opens
    with an auxiliary; otherwise auxiliary initiation means yes/no,
    when/where/who/which means factual, and anything else is open-ended.
    """
    if not question or not question.strip():
        raise ValidationError("question text must be non-empty")
    folded = question.strip().casefold()
    words = _words(folded)
    if not words:
        return "open_ended"
    if _has_choice_list(folded):
        return "multiple_choice"
    if words[0] in _AUXILIARIES:
        return "yes_no"
    if words[0] in _FACTUAL_HEADS:
        return "factual"
    return "open_ended"


def classify_category(
    gateway: Gateway,
    topic: Topic,
    question: ClarifyingQuestion,
    *,
    model_name: str,
    temperature: float = 0.2,
) -> str:
    """Model-based intent categorization over the fixed taxonomy."""
    prompt = render(
        prompts.CATEGORY_CLASSIFICATION,
        {
            "category_definitions": prompts.category_definitions_block(),
            "query": topic.initial_request,
            "question": question.text,
        },
    )
    params = GenerationParams(
        model_name=model_name, temperature=temperature, max_tokens=16
    )
    response = gateway.complete(prompt, params, template_id="category_classification")
    normalized = response.strip().casefold().replace(" ", "_").strip(".")
    for label in prompts.QUESTION_CATEGORIES:
        if normalized == label or re.search(rf"\b{label}\b", normalized):
            return label
    raise ParseError(
        f"category response {response!r} is outside the taxonomy", raw_text=response
    )


# --------------------------------------------------------------------------
# Readability
# --------------------------------------------------------------------------

_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


def count_syllables(word: str) -> int:
    """Vowel-group heuristic with silent-ending handling.

    Counts maximal vowel runs after stripping silent '-ed' (after consonants
    other than t/d) and silent '-es' (after non-sibilant consonants), then
    drops a silent trailing 'e' (kept for consonant+'le' endings). Minimum
    one syllable per word.
    """
    cleaned = re.sub(r"[^a-z]", "", word.casefold())
    if not cleaned:
        return 0
    body = cleaned
    if len(body) > 4 and body.endswith("ed") and body[-3] not in "aeiouytd":
        body = body[:-2]
    elif len(body) > 4 and body.endswith("es") and body[-3] not in "aeiouysxzch":
        body = body[:-2]
    groups = _VOWEL_GROUP_RE.findall(body)
    count = len(groups)
    if (
        count > 1
        and body.endswith("e")
        and not body.endswith("le")
        and body[-2] not in "aeiouy"
    ):
        count -= 1
    return max(count, 1)


def count_sentences(text: str) -> int:
    segments = [s for s in re.split(r"[.!?]+", text) if s.strip()]
    return max(len(segments), 1)


@dataclass(frozen=True)
class Readability:
    flesch_reading_ease: float
    fk_grade: float
    word_count: int


def readability(text: str) -> Readability:
    """Reading-ease and grade-level scores from word, sentence, and syllable
    counts (whitespace words; terminal-punctuation sentences)."""
    if not text or not text.strip():
        raise ValidationError("text must be non-empty")
    words = text.split()
    word_count = len(words)
    sentence_count = count_sentences(text)
    syllable_count = sum(count_syllables(w) for w in words)
    syllable_count = max(syllable_count, 1)

    words_per_sentence = word_count / sentence_count
    syllables_per_word = syllable_count / word_count
    reading_ease = 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word
    grade = 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59
    return Readability(
        flesch_reading_ease=reading_ease, fk_grade=grade, word_count=word_count
    )


def grade_label(grade: float) -> str:
    """School-grade ordinal for a grade-level score, e.g. 5.2 -> '5th'."""
    rounded = max(int(round(grade)), 1)
    if 10 <= rounded % 100 <= 20:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(rounded % 10, "th")
    return f"{rounded}{suffix}"


@dataclass(frozen=True)
class AnalysisProfile:
    """One question's surface analysis across every dimension."""

    question_id: str
    pattern: str
    response_type: str
    category: str
    word_count: int
    flesch_reading_ease: float
    fk_grade: float

    def __post_init__(self) -> None:
        if self.pattern not in QUESTION_PATTERNS:
            raise ValidationError(f"pattern must be one of {QUESTION_PATTERNS}")
        if self.response_type not in RESPONSE_TYPES:
            raise ValidationError(f"response_type must be one of {RESPONSE_TYPES}")
        if self.category not in prompts.QUESTION_CATEGORIES:
            raise ValidationError(
                f"category must be one of {prompts.QUESTION_CATEGORIES}"
            )


def analyze_question(
    question_id: str,
    text: str,
    category: str = "general",
) -> AnalysisProfile:
    """Offline analysis of one question; category defaults to general when
    no classifier output is supplied."""
    scores = readability(text)
    return AnalysisProfile(
        question_id=question_id,
        pattern=match_pattern(text),
        response_type=classify_response_type(text),
        category=category,
        word_count=scores.word_count,
        flesch_reading_ease=scores.flesch_reading_ease,
        fk_grade=scores.fk_grade,
    )


def _register_codecs() -> None:
    from . import ingest

    ingest.register_record_type("analysis_profile", AnalysisProfile)


_register_codecs()
