import itertools

import pytest

from agentcq.crowdllm import (
    Judge,
    JudgePanel,
    PanelPairVerdict,
    aggregate_pair,
    aggregate_scores,
    compare_answers,
    default_panel,
    judge_pair,
    judge_question,
    parse_verdict,
    presentation_swap,
    rate_overall_quality,
    rate_question_aspect,
)
from agentcq.domain import (
    PairwiseVerdict,
    QUESTION_ASPECTS,
    SimulatedAnswer,
    UserProfile,
)
from agentcq.errors import ParseError, ValidationError
from agentcq.gateway import Gateway, MockProvider

from conftest import make_question


def make_gateway(scripts=None, seed=42):
    return Gateway(MockProvider(seed=seed, scripts=scripts), sleep_fn=lambda _s: None)


def judge():
    return Judge(judge_id="j1", temperature=0.2)


def answer(answer_id, question_id="q1", origin="human", text="no, the vehicle"):
    profile = UserProfile(20, 0.5) if origin == "llm" else None
    return SimulatedAnswer(
        answer_id=answer_id,
        question_id=question_id,
        facet_id="F0042",
        text=text,
        origin=origin,
        profile=profile,
    )


class TestPanel:
    def test_default_panel_temperatures(self):
        panel = default_panel("judge-model")
        assert [j.temperature for j in panel.judges] == [0.2, 0.5, 0.7]
        assert len(panel.judges) == 3

    def test_panel_needs_two_judges(self):
        with pytest.raises(ValidationError):
            JudgePanel(judges=(judge(),), model_name="m")


class TestAspectRating:
    def test_scripted_seven(self, topic):
        gw = make_gateway({"aspect_rating": ["7"]})
        value = rate_question_aspect(
            gw, topic, make_question(), "clarity", judge(), model_name="m"
        )
        assert value == 7

    def test_prose_score(self, topic):
        gw = make_gateway({"aspect_rating": ["Score: 9 because it is focused"]})
        assert (
            rate_question_aspect(gw, topic, make_question(), "usefulness", judge(), model_name="m")
            == 9
        )

    def test_word_rating_is_error(self, topic):
        gw = make_gateway({"aspect_rating": ["eleven"]})
        with pytest.raises(ParseError):
            rate_question_aspect(gw, topic, make_question(), "clarity", judge(), model_name="m")

    def test_overall_not_ratable_directly(self, topic):
        gw = make_gateway()
        with pytest.raises(ValidationError):
            rate_question_aspect(
                gw, topic, make_question(), "overall_quality", judge(), model_name="m"
            )


class TestOverallRating:
    def _ratings(self, value=10):
        return {aspect: value for aspect in QUESTION_ASPECTS}

    def test_prompt_embeds_six_ratings(self, topic):
        gw = make_gateway({"overall_rating": ["10"]})
        value = rate_overall_quality(
            gw, topic, make_question(), self._ratings(10), judge(), model_name="m"
        )
        assert value == 10
        prompt = gw.call_log[-1].prompt
        for aspect in QUESTION_ASPECTS:
            assert f"{aspect}: 10" in prompt

    def test_missing_aspect_is_precondition_error(self, topic):
        ratings = self._ratings()
        del ratings["specificity"]
        gw = make_gateway()
        with pytest.raises(ValidationError, match="specificity"):
            rate_overall_quality(
                gw, topic, make_question(), ratings, judge(), model_name="m"
            )

    def test_panel_stores_three_overall_ratings_separately(self, topic):
        gw = make_gateway()
        panel = default_panel("judge-model")
        judgment = judge_question(gw, topic, make_question(), panel)
        assert len(judgment.per_judge) == 3
        overall = [s.overall_quality for s in judgment.per_judge]
        assert all(isinstance(v, int) for v in overall)
        assert judgment.aggregate["overall_quality"] == pytest.approx(
            sum(overall) / 3
        )

    def test_one_call_per_aspect_per_judge_plus_overall(self, topic):
        gw = make_gateway()
        panel = default_panel("judge-model")
        judge_question(gw, topic, make_question(), panel)
        aspect_calls = [r for r in gw.call_log if r.template_id == "aspect_rating"]
        overall_calls = [r for r in gw.call_log if r.template_id == "overall_rating"]
        assert len(aspect_calls) == 6 * 3
        assert len(overall_calls) == 3
        assert all(not r.cached for r in aspect_calls)


class TestParseVerdict:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("A", "A"),
            ("B.", "B"),
            ("Equal", "equal"),
            ("equal", "equal"),
            ("tie", "equal"),
            ("I pick A because it is specific", "A"),
            ("It is a tie", "equal"),
        ],
    )
    def test_parses(self, text, expected):
        assert parse_verdict(text) == expected

    def test_unparseable(self):
        with pytest.raises(ParseError):
            parse_verdict("neither impresses me")


class TestCompareAnswers:
    def test_swap_derandomizes_verdict(self, topic, facet):
        question = make_question(topic_id=topic.topic_id)
        gw = make_gateway({"pairwise_comparison": ["A"]})
        verdict = compare_answers(
            gw, topic, facet, question,
            answer("ha", question.question_id, "human"),
            answer("la", question.question_id, "llm"),
            "naturalness", judge(), model_name="m", swap_presentation=True,
        )
        # judge preferred the first-presented answer, which was canonical B
        assert verdict.verdict == "B"

    def test_equal_stays_equal(self, topic, facet):
        question = make_question(topic_id=topic.topic_id)
        gw = make_gateway({"pairwise_comparison": ["equal"]})
        verdict = compare_answers(
            gw, topic, facet, question,
            answer("ha", question.question_id, "human"),
            answer("la", question.question_id, "llm"),
            "relevance", judge(), model_name="m", swap_presentation=True,
        )
        assert verdict.verdict == "equal"

    def test_answers_for_other_question_rejected(self, topic, facet):
        question = make_question(topic_id=topic.topic_id, question_id="q1")
        gw = make_gateway()
        with pytest.raises(ValidationError, match="must address the given question"):
            compare_answers(
                gw, topic, facet, question,
                answer("ha", "q1", "human"),
                answer("la", "q-other", "llm"),
                "relevance", judge(), model_name="m",
            )


class TestAggregatePair:
    def _verdicts(self, triple, aspect="relevance"):
        return [
            PairwiseVerdict(aspect=aspect, verdict=v, judge_id=f"j{i}")
            for i, v in enumerate(triple)
        ]

    def test_two_a_one_equal_wins(self):
        assert aggregate_pair(self._verdicts(("A", "A", "equal"))) == "A_wins"

    def test_majority_equal_is_tie(self):
        assert aggregate_pair(self._verdicts(("equal", "equal", "B"))) == "tie"

    def test_three_way_split_is_tie(self):
        assert aggregate_pair(self._verdicts(("A", "B", "equal"))) == "tie"

    def test_exhaustive_27_triples_match_rule(self):
        for triple in itertools.product(("A", "B", "equal"), repeat=3):
            outcome = aggregate_pair(self._verdicts(triple))
            counts = {v: triple.count(v) for v in ("A", "B", "equal")}
            if counts["A"] >= 2:
                assert outcome == "A_wins", triple
            elif counts["B"] >= 2:
                assert outcome == "B_wins", triple
            else:
                assert outcome == "tie", triple

    def test_relabeling_symmetry_over_all_triples(self):
        swap = {"A": "B", "B": "A", "equal": "equal"}
        outcome_swap = {"A_wins": "B_wins", "B_wins": "A_wins", "tie": "tie"}
        for triple in itertools.product(("A", "B", "equal"), repeat=3):
            direct = aggregate_pair(self._verdicts(triple))
            mirrored = aggregate_pair(self._verdicts(tuple(swap[v] for v in triple)))
            assert mirrored == outcome_swap[direct], triple


class TestOrientationNeutrality:
    def test_first_position_bias_washes_out(self, topic, facet):
        # A judge that always prefers the first-presented answer should win
        # about half the time for each side once presentation is randomized.
        def first_wins(prompt, params, call_index):
            return "A"

        gw = make_gateway({"pairwise_comparison": first_wins})
        panel = default_panel("judge-model")
        outcomes = {"A_wins": 0, "B_wins": 0, "tie": 0}
        for i in range(400):
            question = make_question(topic_id=topic.topic_id, question_id=f"q{i}")
            result = judge_pair(
                gw, topic, facet, question,
                answer(f"ha{i}", question.question_id, "human"),
                answer(f"la{i}", question.question_id, "llm"),
                "overall_quality", panel, pair_id=f"pair{i}", seed=99,
            )
            outcomes[result.outcome] += 1
        share_a = outcomes["A_wins"] / 400
        assert share_a == pytest.approx(0.5, abs=0.05)
        assert outcomes["tie"] == 0

    def test_pair_verdict_records_orientation(self, topic, facet):
        gw = make_gateway()
        panel = default_panel("judge-model")
        question = make_question(topic_id=topic.topic_id)
        result = judge_pair(
            gw, topic, facet, question,
            answer("ha", question.question_id, "human"),
            answer("la", question.question_id, "llm"),
            "relevance", panel, pair_id="p1", seed=3,
        )
        assert result.presented_swapped == presentation_swap(3, "p1")
        assert result.outcome == aggregate_pair(list(result.per_judge))

    def test_panel_pair_verdict_validates_outcome(self):
        verdicts = tuple(
            PairwiseVerdict(aspect="relevance", verdict="A", judge_id=f"j{i}")
            for i in range(3)
        )
        with pytest.raises(ValidationError, match="majority"):
            PanelPairVerdict(
                pair_id="p", aspect="relevance", per_judge=verdicts, outcome="tie"
            )
