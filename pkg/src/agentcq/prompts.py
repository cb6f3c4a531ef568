"""Prompt templates for every model-facing operation.

Placeholders use ``{name}`` syntax and are substituted literally by
``gateway.render``; callers pre-format numeric bindings (e.g. reveal
probability to two decimals).
"""

from __future__ import annotations

from .domain import QUESTION_ASPECTS
from .gateway import PromptTemplate

FACET_GENERATION = PromptTemplate(
    template_id="facet_generation",
    body=(
        "For the user query: '{query}'\n"
        "Generate a list of {n_facets} diverse facets that this query might be addressing.\n"
        "This query represents multiple user information needs. "
        "Generate diverse facets to capture these varied needs.\n"
        "Ensure each facet is unique and explores different aspects or "
        "interpretations of the query. Avoid repetition and strive for a wide "
        "range of perspectives in your facets.\n"
    ),
)

FACET_QUESTION = PromptTemplate(
    template_id="facet_question",
    body=(
        "For the user query: '{query}'\n"
        "And considering this specific facet: '{facet}'\n"
        "Generate a clarifying question that addresses this facet and helps to "
        "better understand the user's specific information need.\n"
        "Use diverse language and question structure to formulate the questions.\n"
    ),
)

QUESTION_SET = PromptTemplate(
    template_id="question_set",
    body=(
        "For the user query: '{query}'\n"
        "\n"
        "Generate a set of {set_size} clarifying questions. The goal is to "
        "better understand the user's specific information need.\n"
        "\n"
        "This query represents multiple user information needs. Generate "
        "diverse clarifying questions to capture these varied needs.\n"
        "Ensure each question is unique and explores different aspects or "
        "interpretations of the query. Avoid repetition and strive for a wide "
        "range of perspectives in your questions.\n"
        "\n"
        "IMPORTANT GUIDELINES:\n"
        "1. Each question should aim to clarify a different aspect of the "
        "user's intent or information need.\n"
        "2. Ensure all questions are unique. Do not repeat questions.\n"
        "3. Focus on questions that will help narrow down or specify the "
        "user's request.\n"
        "4. Consider potential ambiguities or multiple interpretations of the query.\n"
    ),
)

FILTER_SCORING = PromptTemplate(
    template_id="filter_scoring",
    body=(
        "Evaluate the following question for the user query: '{query}'\n"
        'Question: "{question}"\n'
        "Consider these aspects:\n"
        "    1. Clarification: How well does this question help to better "
        "understand the user's original query?\n"
        "    2. On Topic: To what degree does this question directly relate "
        "to the subject matter of the user's original query?\n"
        "\n"
        "Provide a score (0-10) for each aspect and a brief explanation.\n"
    ),
)

USER_SIMULATION = PromptTemplate(
    template_id="user_simulation",
    body=(
        "You are a user who initially made this request: '{query}'.\n"
        "Your actual information need is: '{facet}'.\n"
        "Respond to the clarifying question based on this information need.\n"
        "\n"
        "Clarifying question: '{question}'\n"
        "\n"
        "Your verbosity level is {verbosity_level}.\n"
        "Your reveal probability is {reveal_probability}.\n"
        "Keep your response short, ideally under {max_tokens} tokens.\n"
        "\n"
        "Remember: Your answer should not include any additional information "
        "that is not part of your actual information need ('{facet}').\n"
    ),
)

# Same interaction without the user-characteristic lines; shares the answer
# generation code path with the parameterized variant.
USER_SIMULATION_PLAIN = PromptTemplate(
    template_id="user_simulation_plain",
    body=(
        "You are a user who initially made this request: '{query}'.\n"
        "Your actual information need is: '{facet}'.\n"
        "Respond to the clarifying question based on this information need.\n"
        "\n"
        "Clarifying question: '{question}'\n"
        "\n"
        "Remember: Your answer should not include any additional information "
        "that is not part of your actual information need ('{facet}').\n"
    ),
)

# One rating prompt per question aspect; each aspect is rated in an
# independent call so earlier ratings cannot bias later ones.
_ASPECT_RATING_BODY = (
    "As a user, you are evaluating the {aspect_label} of the system's "
    "clarifying question in relation to your original query.\n"
    "\n"
    "Definition:\n"
    "    - {aspect_title}: {aspect_definition}\n"
    "\n"
    "Scale:\n"
    "    1-10, where 1 is {low_anchor} and 10 is {high_anchor}.\n"
    "\n"
    'Your original query: "{original_query}"\n'
    'System\'s clarifying question: "{system_question}"\n'
    "\n"
    "{guidance}"
)

ASPECT_RATING = PromptTemplate(template_id="aspect_rating", body=_ASPECT_RATING_BODY)

OVERALL_RATING = PromptTemplate(
    template_id="overall_rating",
    body=(
        "As a user, you are providing an overall evaluation of the system's "
        "clarifying question, taking into account your ratings from other aspects.\n"
        "\n"
        "Definition:\n"
        "    - Overall Quality: Your comprehensive assessment of how well the "
        "system's clarifying question helps you get a better response to your "
        "original query, considering clarity, relevance, specificity, and usefulness.\n"
        "\n"
        "Scale:\n"
        "    1-10, where 1 is the lowest quality and 10 is the highest quality.\n"
        "\n"
        'Your original query: "{original_query}"\n'
        'System\'s clarifying question: "{system_question}"\n'
        "\n"
        "Your rating from the other metrics: {other_ratings}\n"
        "\n"
        "Consider these ratings and provide an overall evaluation of the "
        "system's clarifying question quality. Explain your reasoning, "
        "referencing your other metric ratings.\n"
    ),
)

PAIRWISE_COMPARISON = PromptTemplate(
    template_id="pairwise_comparison",
    body=(
        "You are comparing two user answers to the same clarifying question.\n"
        "\n"
        "Original query: '{query}'\n"
        "User information need: '{facet}'\n"
        "Clarifying question: '{question}'\n"
        "\n"
        "Answer A: '{answer_a}'\n"
        "Answer B: '{answer_b}'\n"
        "\n"
        "Aspect to judge:\n"
        "    - {aspect_title}: {aspect_definition}\n"
        "\n"
        "Which answer is better on this aspect? Reply with exactly one of: "
        "'A', 'B', or 'Equal'.\n"
    ),
)

CATEGORY_CLASSIFICATION = PromptTemplate(
    template_id="category_classification",
    body=(
        "Classify the clarifying question below into exactly one of these "
        "categories:\n"
        "{category_definitions}\n"
        "\n"
        "User query: '{query}'\n"
        "Clarifying question: '{question}'\n"
        "\n"
        "Reply with the single category name that fits best.\n"
    ),
)

# Aspect metadata used to build the per-aspect rating prompts. The complexity
# aspect keeps its original probing guidance; other aspects need none.
QUESTION_ASPECT_DEFINITIONS: dict[str, dict[str, str]] = {
    "clarification": {
        "title": "Clarification",
        "definition": (
            "How well the question seeks to understand the original query "
            "without introducing unrelated topics."
        ),
        "low_anchor": "not clarifying at all",
        "high_anchor": "maximally clarifying",
        "guidance": "",
    },
    "clarity": {
        "title": "Clarity",
        "definition": (
            "How easily understood and unambiguous the clarifying question is "
            "from the user's perspective."
        ),
        "low_anchor": "very unclear",
        "high_anchor": "perfectly clear",
        "guidance": "",
    },
    "on_topic": {
        "title": "On-topic",
        "definition": (
            "The question's direct relation to the subject matter of the "
            "original query."
        ),
        "low_anchor": "completely off topic",
        "high_anchor": "fully on topic",
        "guidance": "",
    },
    "question_complexity": {
        "title": "Question Complexity",
        "definition": (
            "The degree to which the clarifying question introduces technical "
            "terms, specialized concepts, or requires domain-specific "
            "knowledge not present in the original query."
        ),
        "low_anchor": "very simple (uses only general terms and concepts)",
        "high_anchor": "highly complex (introduces specialized terminology or concepts)",
        "guidance": (
            "Evaluate the complexity of the system's question compared to "
            "your original query. Consider:\n"
            "    1. Does it introduce technical terms or jargon not present "
            "in the original query?\n"
            "    2. Does it require specialized knowledge that might not be "
            "evident from the original query?\n"
        ),
    },
    "specificity": {
        "title": "Specificity",
        "definition": (
            "The question's focus on particular aspects of the query rather "
            "than being general."
        ),
        "low_anchor": "entirely general",
        "high_anchor": "highly specific",
        "guidance": "",
    },
    "usefulness": {
        "title": "Usefulness",
        "definition": (
            "How much answering the question would improve the response to "
            "the original query."
        ),
        "low_anchor": "not useful at all",
        "high_anchor": "extremely useful",
        "guidance": "",
    },
}

ANSWER_ASPECT_DEFINITIONS: dict[str, dict[str, str]] = {
    "relevance": {
        "title": "Relevance",
        "definition": (
            "How directly the user's answer addresses the system's clarifying question."
        ),
    },
    "usefulness": {
        "title": "Usefulness",
        "definition": (
            "The value of the user's answer in clarifying their original "
            "information need."
        ),
    },
    "naturalness": {
        "title": "Naturalness",
        "definition": (
            "The human-like quality and conversational tone of the user's response."
        ),
    },
    "overall_quality": {
        "title": "Overall Quality",
        "definition": (
            "Holistic assessment of the answer's effectiveness in aiding "
            "system understanding."
        ),
    },
}

QUESTION_CATEGORIES = (
    "disambiguation",
    "preference_identification",
    "information_gathering",
    "comparison",
    "confirmation",
    "general",
)

CATEGORY_DEFINITIONS: dict[str, str] = {
    "disambiguation": (
        "The query is ambiguous and could refer to different concepts or entities."
    ),
    "preference_identification": (
        "Clarifies the user's specific preferences, including personal, "
        "spatial, temporal, or purpose-related information."
    ),
    "information_gathering": (
        "Seeks additional details, verifications, or narrows down broad topics."
    ),
    "comparison": (
        "Involves comparing entities or options to aid decision-making."
    ),
    "confirmation": (
        "Seeks to verify or confirm previously provided information or assumptions."
    ),
    "general": (
        "A broad question that prompts for additional details or elaboration "
        "on a topic."
    ),
}


def aspect_rating_bindings(
    aspect: str, original_query: str, system_question: str
) -> dict[str, str]:
    """Bindings for ASPECT_RATING covering one of the six rated aspects."""
    meta = QUESTION_ASPECT_DEFINITIONS[aspect]
    return {
        "aspect_label": meta["title"].lower(),
        "aspect_title": meta["title"],
        "aspect_definition": meta["definition"],
        "low_anchor": meta["low_anchor"],
        "high_anchor": meta["high_anchor"],
        "original_query": original_query,
        "system_question": system_question,
        "guidance": meta["guidance"],
    }


def format_other_ratings(ratings: dict[str, int]) -> str:
    """Render the six aspect ratings in canonical order for the overall prompt."""
    return ", ".join(f"{aspect}: {ratings[aspect]}" for aspect in QUESTION_ASPECTS)


def category_definitions_block() -> str:
    return "\n".join(
        f"    - {name}: {CATEGORY_DEFINITIONS[name]}" for name in QUESTION_CATEGORIES
    )
