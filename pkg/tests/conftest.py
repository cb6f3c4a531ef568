from __future__ import annotations

from pathlib import Path

import pytest

from agentcq.domain import ClarifyingQuestion, Facet, QuestionGenParams, Topic

REPO_ROOT = Path(__file__).resolve().parents[1]
CLARIQ_DIR = REPO_ROOT / "data" / "clariq"

clariq_available = pytest.mark.skipif(
    not (CLARIQ_DIR / "train.tsv").exists(),
    reason="ClariQ data not present under data/clariq/",
)


@pytest.fixture
def topic() -> Topic:
    return Topic(topic_id="42", initial_request="Tell me about defender")


@pytest.fixture
def facet(topic: Topic) -> Facet:
    return Facet(
        facet_id="F0042",
        topic_id=topic.topic_id,
        description="Find information on the Land Rover Defender sport-utility vehicle.",
    )


def make_question(
    topic_id: str = "42",
    question_id: str = "q1",
    text: str = "Are you interested in cybersecurity tools?",
    source: str = "baseline",
    facet_id: str | None = None,
    temperature: float = 0.7,
    set_index: int | None = None,
) -> ClarifyingQuestion:
    return ClarifyingQuestion(
        question_id=question_id,
        topic_id=topic_id,
        text=text,
        source=source,
        gen_params=QuestionGenParams(
            model_name="stub-model",
            temperature=temperature,
            facet_id=facet_id,
            set_index=set_index,
        ),
    )
