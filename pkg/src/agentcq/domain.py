"""Core data types shared by every pipeline stage.

All types are immutable after construction and validate their invariants in
``__post_init__``, so a constructed object is always safe to share across
concurrent stages.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ValidationError

QUESTION_SOURCES = ("facet_based", "temperature_variation", "baseline", "human")
ANSWER_ORIGINS = ("llm", "human")

# The six aspect ratings collected independently, plus the grounded overall.
QUESTION_ASPECTS = (
    "clarification",
    "clarity",
    "on_topic",
    "question_complexity",
    "specificity",
    "usefulness",
)
ALL_QUESTION_ASPECTS = QUESTION_ASPECTS + ("overall_quality",)

ANSWER_ASPECTS = ("relevance", "usefulness", "naturalness", "overall_quality")

PAIR_VERDICTS = ("A", "B", "equal")
PAIR_OUTCOMES = ("A_wins", "B_wins", "tie")

VERBOSITY_MIN_TOKENS = 10
VERBOSITY_MAX_TOKENS = 60
REVEAL_MIN = 0.0
REVEAL_MAX = 0.9


def _require_nonempty(value: str, name: str, *, trim: bool = True) -> None:
    checked = value.strip() if trim else value
    if not isinstance(value, str) or not checked:
        raise ValidationError(f"{name} must be a non-empty string")


@dataclass(frozen=True)
class Topic:
    """An initial, typically ambiguous, user request."""

    topic_id: str
    initial_request: str

    def __post_init__(self) -> None:
        _require_nonempty(self.topic_id, "topic_id")
        _require_nonempty(self.initial_request, "initial_request")


@dataclass(frozen=True)
class Facet:
    """One concrete information need underlying a topic."""

    facet_id: str
    topic_id: str
    description: str

    def __post_init__(self) -> None:
        _require_nonempty(self.facet_id, "facet_id")
        _require_nonempty(self.topic_id, "topic_id")
        _require_nonempty(self.description, "description")


@dataclass(frozen=True)
class QuestionGenParams:
    """Provenance of a generated question: model, sampling, and origin facet/set."""

    model_name: str
    temperature: float
    facet_id: str | None = None
    set_index: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValidationError("temperature out of range [0, 2]")


@dataclass(frozen=True)
class ClarifyingQuestion:
    """A clarifying question with full generation provenance."""

    question_id: str
    topic_id: str
    text: str
    source: str
    gen_params: QuestionGenParams | None = None

    def __post_init__(self) -> None:
        _require_nonempty(self.question_id, "question_id")
        _require_nonempty(self.topic_id, "topic_id")
        _require_nonempty(self.text, "text")
        if self.source not in QUESTION_SOURCES:
            raise ValidationError(
                f"source must be one of {QUESTION_SOURCES}, got {self.source!r}"
            )
        facet_id = self.gen_params.facet_id if self.gen_params else None
        if self.source == "facet_based" and not facet_id:
            raise ValidationError("facet_based questions must carry gen_params.facet_id")
        if self.source != "facet_based" and facet_id:
            raise ValidationError(
                f"source {self.source!r} must not carry a facet_id"
            )


@dataclass(frozen=True)
class UserProfile:
    """Simulated-user parameters: answer length budget and disclosure tendency."""

    verbosity_max_tokens: int
    reveal_probability: float

    def __post_init__(self) -> None:
        if (
            not isinstance(self.verbosity_max_tokens, int)
            or isinstance(self.verbosity_max_tokens, bool)
            or not VERBOSITY_MIN_TOKENS <= self.verbosity_max_tokens <= VERBOSITY_MAX_TOKENS
        ):
            raise ValidationError("verbosity_max_tokens out of range")
        if not REVEAL_MIN <= self.reveal_probability <= REVEAL_MAX:
            raise ValidationError("reveal_probability out of range")


def validate_profile(verbosity: int, reveal: float) -> UserProfile:
    """Build a UserProfile, rejecting out-of-range values by field name."""
    return UserProfile(verbosity_max_tokens=verbosity, reveal_probability=reveal)


@dataclass(frozen=True)
class SimulatedAnswer:
    """An answer to a clarifying question, simulated or taken from human data."""

    answer_id: str
    question_id: str
    facet_id: str
    text: str
    origin: str
    profile: UserProfile | None = None

    def __post_init__(self) -> None:
        _require_nonempty(self.answer_id, "answer_id")
        _require_nonempty(self.question_id, "question_id")
        _require_nonempty(self.facet_id, "facet_id")
        # Whitespace-only text is constructible (it occurs in human data) but
        # empty text is not; reformulation treats blank answers as degenerate.
        _require_nonempty(self.text, "text", trim=False)
        if self.origin not in ANSWER_ORIGINS:
            raise ValidationError(f"origin must be one of {ANSWER_ORIGINS}")
        if self.origin == "llm" and self.profile is None:
            raise ValidationError("llm answers must carry the profile that produced them")
        if self.origin == "human" and self.profile is not None:
            raise ValidationError("human answers must not carry a profile")


RATING_MIN = 1
RATING_MAX = 10


def _check_rating(value: int, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if not RATING_MIN <= value <= RATING_MAX:
        raise ValidationError(f"{name} out of range {RATING_MIN}..{RATING_MAX}: {value}")


@dataclass(frozen=True)
class QuestionScores:
    """One judge's ratings of a question on every aspect.

    Fractional ratings are rejected rather than rounded; silent rounding would
    corrupt downstream agreement statistics.
    """

    judge_id: str
    judge_temperature: float
    clarification: int
    clarity: int
    on_topic: int
    question_complexity: int
    specificity: int
    usefulness: int
    overall_quality: int

    def __post_init__(self) -> None:
        _require_nonempty(self.judge_id, "judge_id")
        for aspect in ALL_QUESTION_ASPECTS:
            _check_rating(getattr(self, aspect), aspect)

    def aspect_ratings(self) -> dict[str, int]:
        """The six non-overall ratings, in canonical aspect order."""
        return {a: getattr(self, a) for a in QUESTION_ASPECTS}


@dataclass(frozen=True)
class PairwiseVerdict:
    """A single judge's verdict on one aspect of an answer pair."""

    aspect: str
    verdict: str
    judge_id: str

    def __post_init__(self) -> None:
        if self.aspect not in ANSWER_ASPECTS:
            raise ValidationError(f"aspect must be one of {ANSWER_ASPECTS}")
        if self.verdict not in PAIR_VERDICTS:
            raise ValidationError(f"verdict must be one of {PAIR_VERDICTS}")
        _require_nonempty(self.judge_id, "judge_id")


@dataclass(frozen=True)
class RatingsMatrix:
    """A complete items-by-raters score grid for agreement statistics."""

    items: tuple[str, ...]
    raters: tuple[str, ...]
    scores: tuple[tuple[float, ...], ...]
    scale_min: float
    scale_max: float

    def __post_init__(self) -> None:
        if len(self.items) != len(self.scores):
            raise ValidationError("scores must have one row per item")
        if self.scale_min >= self.scale_max:
            raise ValidationError("scale_min must be below scale_max")
        n_raters = len(self.raters)
        for row_idx, row in enumerate(self.scores):
            if len(row) != n_raters:
                raise ValidationError(
                    f"ragged scores: item {self.items[row_idx]!r} has "
                    f"{len(row)} ratings for {n_raters} raters"
                )
            for value in row:
                if value is None:
                    raise ValidationError("scores grid must be fully populated")
                if not self.scale_min <= value <= self.scale_max:
                    raise ValidationError(
                        f"score {value} outside scale [{self.scale_min}, {self.scale_max}]"
                    )

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_raters(self) -> int:
        return len(self.raters)

    @classmethod
    def from_rows(
        cls,
        items: list[str],
        raters: list[str],
        scores: list[list[float]],
        scale_min: float,
        scale_max: float,
    ) -> "RatingsMatrix":
        return cls(
            items=tuple(items),
            raters=tuple(raters),
            scores=tuple(tuple(row) for row in scores),
            scale_min=scale_min,
            scale_max=scale_max,
        )


def record_fields(obj) -> dict:
    """Shallow field dict for a domain dataclass (serialization helper)."""
    return {f.name: getattr(obj, f.name) for f in fields(obj)}
