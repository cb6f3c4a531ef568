import threading
import time

import pytest

from agentcq import prompts
from agentcq.errors import (
    ParseError,
    ProviderRefusal,
    TransportError,
    ValidationError,
)
from agentcq.gateway import (
    Gateway,
    GenerationParams,
    MockProvider,
    PromptTemplate,
    TransientProviderError,
    parse_integer_rating,
    render,
)


def params(**overrides):
    base = dict(model_name="stub-model", temperature=0.7, max_tokens=64)
    base.update(overrides)
    return GenerationParams(**base)


def make_gateway(provider=None, **kwargs):
    kwargs.setdefault("sleep_fn", lambda _s: None)
    return Gateway(provider or MockProvider(seed=42), **kwargs)


class TestRender:
    def test_simple_substitution(self):
        template = PromptTemplate(template_id="t", body="Q: {query}")
        assert render(template, {"query": "java"}) == "Q: java"

    def test_facet_prompt_contains_both_strings_verbatim(self):
        text = render(
            prompts.FACET_QUESTION,
            {"query": "Tell me about defender", "facet": "the Land Rover Defender"},
        )
        assert "Tell me about defender" in text
        assert "the Land Rover Defender" in text
        assert "And considering this specific facet" in text

    def test_missing_placeholder_named(self):
        with pytest.raises(ValidationError, match="unbound placeholder: facet"):
            render(prompts.FACET_QUESTION, {"query": "x"})

    def test_unknown_binding_rejected(self):
        template = PromptTemplate(template_id="t", body="Q: {query}")
        with pytest.raises(ValidationError, match="unknown binding"):
            render(template, {"query": "x", "stray": "y"})

    def test_substitution_changes_nothing_else(self):
        template = PromptTemplate(template_id="t", body="a {x} b {y} c")
        assert render(template, {"x": "1", "y": "2"}) == "a 1 b 2 c"


class TestGenerationParams:
    def test_temperature_out_of_range_rejected_before_any_call(self):
        provider = MockProvider(seed=1)
        with pytest.raises(ValidationError, match="temperature"):
            params(temperature=2.5)
        # no call could even be issued
        gw = make_gateway(provider)
        assert gw.call_log == []

    def test_top_p_bounds(self):
        with pytest.raises(ValidationError):
            params(top_p=1.5)

    def test_max_tokens_positive(self):
        with pytest.raises(ValidationError):
            params(max_tokens=0)


class TestMockDeterminism:
    def test_identical_text_across_repeated_calls(self):
        gw1 = make_gateway(MockProvider(seed=42), cache_enabled=False)
        gw2 = make_gateway(MockProvider(seed=42), cache_enabled=False)
        p = params()
        first = [gw1.complete("x", p) for _ in range(3)]
        second = [gw2.complete("x", p) for _ in range(3)]
        assert first == second
        assert len(set(first)) == 1

    def test_seed_changes_output(self):
        out_a = make_gateway(MockProvider(seed=1)).complete("x", params())
        out_b = make_gateway(MockProvider(seed=2)).complete("x", params())
        assert out_a != out_b

    def test_params_change_output(self):
        gw = make_gateway(MockProvider(seed=1))
        assert gw.complete("x", params(temperature=0.5)) != gw.complete(
            "x", params(temperature=0.9)
        )

    def test_scripted_list_consumed_per_call(self):
        provider = MockProvider(seed=1, scripts={"t": ["first", "second"]})
        gw = make_gateway(provider, cache_enabled=False)
        assert gw.complete("a", params(), template_id="t") == "first"
        assert gw.complete("b", params(), template_id="t") == "second"
        assert gw.complete("c", params(), template_id="t") == "second"


class TestRetries:
    def test_two_failures_then_success(self):
        calls = {"n": 0}

        def flaky(prompt, p, call_index):
            calls["n"] += 1
            if calls["n"] <= 2:
                raise TransientProviderError("boom")
            return "ok"

        provider = MockProvider(seed=1, scripts={"t": flaky})
        gw = make_gateway(provider, retry_budget=3)
        assert gw.complete("x", params(), template_id="t") == "ok"
        record = gw.call_log[-1]
        assert record.attempts == 3
        assert record.response == "ok"
        assert record.error is None

    def test_budget_exhausted_carries_attempt_count(self):
        def always_fail(prompt, p, call_index):
            raise TransientProviderError("down")

        provider = MockProvider(seed=1, scripts={"t": always_fail})
        gw = make_gateway(provider, retry_budget=3)
        with pytest.raises(TransportError) as excinfo:
            gw.complete("x", params(), template_id="t")
        assert excinfo.value.attempts == 3
        assert gw.call_log[-1].attempts == 3

    def test_refusal_not_retried(self):
        calls = {"n": 0}

        def refuse(prompt, p, call_index):
            calls["n"] += 1
            raise ProviderRefusal("no")

        provider = MockProvider(seed=1, scripts={"t": refuse})
        gw = make_gateway(provider, retry_budget=3)
        with pytest.raises(ProviderRefusal):
            gw.complete("x", params(), template_id="t")
        assert calls["n"] == 1

    def test_exactly_one_response_per_request_downstream(self):
        def flaky(prompt, p, call_index):
            if call_index == 0:
                raise TransientProviderError("boom")
            return "ok"

        provider = MockProvider(seed=1, scripts={"t": flaky})
        gw = make_gateway(provider, retry_budget=2)
        gw.complete("x", params(), template_id="t")
        successes = [r for r in gw.call_log if r.response]
        assert len(successes) == 1


class TestCache:
    def test_identical_requests_hit_cache(self):
        count = {"n": 0}

        def counting(prompt, p, call_index):
            count["n"] += 1
            return "resp"

        provider = MockProvider(seed=1, scripts={"t": counting})
        gw = make_gateway(provider)
        gw.complete("x", params(), template_id="t")
        gw.complete("x", params(), template_id="t")
        assert count["n"] == 1
        assert [r.cached for r in gw.call_log] == [False, True]

    def test_different_model_not_cached_together(self):
        gw = make_gateway(MockProvider(seed=1))
        a = gw.complete("x", params(model_name="m-a"))
        b = gw.complete("x", params(model_name="m-b"))
        assert not gw.call_log[-1].cached
        assert a != b


class TestConcurrencyLimit:
    def test_max_in_flight_never_exceeds_limit(self):
        limit = 4
        state = {"in_flight": 0, "max_seen": 0}
        lock = threading.Lock()

        def slow(prompt, p, call_index):
            with lock:
                state["in_flight"] += 1
                state["max_seen"] = max(state["max_seen"], state["in_flight"])
            time.sleep(0.02)
            with lock:
                state["in_flight"] -= 1
            return f"r-{call_index}"

        provider = MockProvider(seed=1, scripts={"t": slow})
        gw = make_gateway(provider, max_concurrency=limit, cache_enabled=False)

        threads = [
            threading.Thread(
                target=lambda i=i: gw.complete(f"p{i}", params(), template_id="t")
            )
            for i in range(16)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert state["max_seen"] <= limit
        assert len(gw.call_log) == 16


class TestParseIntegerRating:
    def test_bare_integer(self):
        assert parse_integer_rating("7") == 7

    def test_labeled_score_with_prose(self):
        assert parse_integer_rating("Score: 9 because it narrows the query") == 9

    def test_words_rejected(self):
        with pytest.raises(ParseError):
            parse_integer_rating("eleven")

    def test_out_of_range_rejected(self):
        with pytest.raises(ParseError):
            parse_integer_rating("Score: 12")

    def test_fraction_rejected_not_rounded(self):
        with pytest.raises(ParseError):
            parse_integer_rating("7.5")

    def test_error_carries_raw_text(self):
        with pytest.raises(ParseError) as excinfo:
            parse_integer_rating("no idea")
        assert excinfo.value.raw_text == "no idea"
