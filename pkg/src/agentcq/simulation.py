"""Parameterized user-response simulation.

Samples user profiles (verbosity budget, reveal probability), builds the
simulation prompt around them, and generates one answer per clarifying
question. Profile sampling is seeded per (run, question) so reruns reproduce
profiles even against a live provider.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .domain import (
    ClarifyingQuestion,
    Facet,
    REVEAL_MAX,
    REVEAL_MIN,
    SimulatedAnswer,
    Topic,
    UserProfile,
    VERBOSITY_MAX_TOKENS,
    VERBOSITY_MIN_TOKENS,
)
from .errors import ValidationError
from .gateway import Gateway, GenerationParams, render
from . import prompts

ANSWER_TEMPERATURE = 0.7
ANSWER_TOP_P = 0.98
ANSWER_FREQUENCY_PENALTY = 0.5
ANSWER_PRESENCE_PENALTY = 0.2


@dataclass(frozen=True)
class SimulationRequest:
    """Everything needed to simulate one answer."""

    topic: Topic
    facet: Facet
    question: ClarifyingQuestion
    profile: UserProfile
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.facet.topic_id == self.topic.topic_id == self.question.topic_id):
            raise ValidationError(
                "topic/facet/question mismatch: "
                f"topic={self.topic.topic_id}, facet.topic={self.facet.topic_id}, "
                f"question.topic={self.question.topic_id}"
            )


def derive_seed(root_seed: int, *parts: str) -> int:
    """Split one root seed into independent per-item seeds."""
    material = f"{root_seed}:" + ":".join(parts)
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sample_profile(rng_seed: int) -> UserProfile:
    """Draw verbosity uniformly over the token range and reveal probability
    uniformly over its range; deterministic given the seed."""
    rng = random.Random(rng_seed)
    verbosity = rng.randint(VERBOSITY_MIN_TOKENS, VERBOSITY_MAX_TOKENS)
    reveal = rng.uniform(REVEAL_MIN, REVEAL_MAX)
    return UserProfile(verbosity_max_tokens=verbosity, reveal_probability=reveal)


def count_tokens(text: str) -> int:
    """Whitespace token count; answer lengths are reported in words."""
    return len(text.split())


def build_parameterized_prompt(req: SimulationRequest) -> str:
    """Render the user-simulation prompt with profile values substituted.

    The reveal probability is formatted to two decimals; the facet appears
    both as the information need and in the closing reminder clause.
    """
    return render(
        prompts.USER_SIMULATION,
        {
            "query": req.topic.initial_request,
            "facet": req.facet.description,
            "question": req.question.text,
            "verbosity_level": str(req.profile.verbosity_max_tokens),
            "reveal_probability": f"{req.profile.reveal_probability:.2f}",
            "max_tokens": str(req.profile.verbosity_max_tokens),
        },
    )


def build_plain_prompt(req: SimulationRequest) -> str:
    """Same interaction with the user characteristics omitted from the prompt."""
    return render(
        prompts.USER_SIMULATION_PLAIN,
        {
            "query": req.topic.initial_request,
            "facet": req.facet.description,
            "question": req.question.text,
        },
    )


def simulate_answer(
    gateway: Gateway,
    req: SimulationRequest,
    *,
    model_name: str,
    answer_id: str | None = None,
    parameterized: bool = True,
) -> SimulatedAnswer:
    """Generate one answer for (topic, facet, question) under the profile.

    The non-parameterized route shares this code path; it only renders the
    profile-free template while keeping identical generation parameters.
    """
    prompt = build_parameterized_prompt(req) if parameterized else build_plain_prompt(req)
    template_id = "user_simulation" if parameterized else "user_simulation_plain"
    params = GenerationParams(
        model_name=model_name,
        temperature=ANSWER_TEMPERATURE,
        top_p=ANSWER_TOP_P,
        max_tokens=req.profile.verbosity_max_tokens,
        frequency_penalty=ANSWER_FREQUENCY_PENALTY,
        presence_penalty=ANSWER_PRESENCE_PENALTY,
    )
    text = gateway.complete(prompt, params, template_id=template_id)
    return SimulatedAnswer(
        answer_id=answer_id
        or f"sim:{req.facet.facet_id}:{req.question.question_id}",
        question_id=req.question.question_id,
        facet_id=req.facet.facet_id,
        text=text,
        origin="llm",
        profile=req.profile,
    )
