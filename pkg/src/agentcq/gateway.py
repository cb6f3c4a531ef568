"""Single choke-point for model calls.

Handles prompt templating, generation-parameter validation, bounded
concurrency, retries with exponential backoff, per-run response caching, and
an append-only call log. A deterministic mock provider makes every
downstream stage testable offline; a live provider speaks a chat-completion
wire API configured through AGENTCQ_API_BASE / AGENTCQ_API_KEY.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import GatewayError, ParseError, ProviderRefusal, TransportError, ValidationError


@dataclass(frozen=True)
class GenerationParams:
    """Sampling parameters recorded with every call."""

    model_name: str
    temperature: float = 0.7
    top_p: float = 1.0
    top_k: int | None = None
    max_tokens: int = 256
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ValidationError("model_name must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValidationError(f"temperature out of range [0, 2]: {self.temperature}")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValidationError(f"top_p out of range [0, 1]: {self.top_p}")
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be >= 1")

    def canonical(self) -> str:
        payload = {
            "model_name": self.model_name,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt body with named ``{placeholder}`` slots.

    Rendering fails unless every required placeholder is bound; by default
    every placeholder appearing in the body is required.
    """

    template_id: str
    body: str
    required_placeholders: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.template_id:
            raise ValidationError("template_id must be non-empty")
        found = frozenset(_PLACEHOLDER_RE.findall(self.body))
        required = self.required_placeholders or found
        if not required <= found:
            raise ValidationError(
                f"required placeholders {sorted(required - found)} not present in body"
            )
        object.__setattr__(self, "required_placeholders", required)

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.body))


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute placeholders literally; reject missing or unknown bindings."""
    placeholders = template.placeholders
    missing = sorted(template.required_placeholders - set(bindings))
    if missing:
        raise ValidationError(f"unbound placeholder: {missing[0]}")
    unknown = sorted(set(bindings) - placeholders)
    if unknown:
        raise ValidationError(f"unknown binding: {unknown[0]}")

    def substitute(match: re.Match) -> str:
        return str(bindings[match.group(1)])

    return _PLACEHOLDER_RE.sub(substitute, template.body)


@dataclass
class CallRecord:
    """One logical request through the gateway (retries collapse into it)."""

    request_id: str
    template_id: str | None
    prompt: str
    params: str
    response: str
    attempts: int
    latency_s: float
    cached: bool = False
    error: str | None = None


class Provider(Protocol):
    def complete_once(
        self, prompt: str, params: GenerationParams, template_id: str | None = None
    ) -> str: ...


class TransientProviderError(GatewayError):
    """Raised by providers for retryable transport-level failures."""


def _stable_hash(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


_MOCK_SUBJECTS = (
    "the time period", "the geographic region", "the intended audience",
    "the level of detail", "the underlying purpose", "the specific subtopic",
    "the preferred format", "the practical application", "the historical context",
    "the technical depth", "the related alternatives", "the cost considerations",
    "the beginner perspective", "the expert perspective", "the comparison criteria",
    "the source credibility", "the recency of information", "the regional variations",
    "the common misconceptions", "the safety aspects",
)

_MOCK_OPENERS = (
    "Are you interested in", "Are you looking for", "Do you want details on",
    "Would you like information about", "What specific part of", "Is there",
    "Do you need", "Which specific aspect of", "How much do you know about",
    "Are you asking about",
)


class MockProvider:
    """Deterministic offline provider.

    Responses are a pure function of (seed, template_id, prompt, params), so
    repeated runs are byte-identical. Behavior is scriptable per template_id:
    a script may be a list of canned responses (consumed per call) or a
    callable ``(prompt, params, call_index) -> str`` which may raise to
    simulate failures.
    """

    def __init__(self, seed: int = 0, scripts: dict | None = None):
        self.seed = seed
        self.scripts = dict(scripts or {})
        self._script_calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def _next_script_index(self, template_id: str) -> int:
        with self._lock:
            index = self._script_calls.get(template_id, 0)
            self._script_calls[template_id] = index + 1
            return index

    def complete_once(
        self, prompt: str, params: GenerationParams, template_id: str | None = None
    ) -> str:
        template_id = template_id or ""
        script = self.scripts.get(template_id)
        if script is not None:
            index = self._next_script_index(template_id)
            if callable(script):
                return script(prompt, params, index)
            return script[min(index, len(script) - 1)]
        return self._default_response(template_id, prompt, params)

    # -- default deterministic behaviors, one per template family ----------

    def _default_response(
        self, template_id: str, prompt: str, params: GenerationParams
    ) -> str:
        h = _stable_hash(str(self.seed), template_id, prompt, params.canonical())
        rng = random.Random(h)
        if template_id == "facet_generation":
            n = _extract_int(prompt, r"list of (\d+) diverse facets", default=40)
            return self._numbered_list(rng, n, kind="facet")
        if template_id == "question_set":
            n = _extract_int(prompt, r"set of (\d+) clarifying questions", default=10)
            return self._numbered_list(rng, n, kind="question")
        if template_id in ("facet_question",):
            return self._question_line(rng)
        if template_id == "filter_scoring":
            clar = rng.randint(0, 10)
            topical = rng.randint(0, 10)
            return (
                f"Clarification: {clar}\n"
                f"On Topic: {topical}\n"
                "Explanation: synthetic offline assessment."
            )
        if template_id in ("aspect_rating", "overall_rating"):
            return f"Score: {rng.randint(1, 10)}"
        if template_id == "pairwise_comparison":
            return rng.choice(("A", "B", "Equal"))
        if template_id == "category_classification":
            return rng.choice(
                (
                    "disambiguation",
                    "preference_identification",
                    "information_gathering",
                    "comparison",
                    "confirmation",
                    "general",
                )
            )
        if template_id in ("user_simulation", "user_simulation_plain"):
            return self._answer_text(rng, params.max_tokens)
        # Unknown template: an echo-ish deterministic line.
        return f"mock-response-{h % 100000:05d}"

    def _numbered_list(self, rng: random.Random, n: int, kind: str) -> str:
        lines = []
        for i in range(1, n + 1):
            subject = _MOCK_SUBJECTS[rng.randrange(len(_MOCK_SUBJECTS))]
            if kind == "facet":
                lines.append(f"{i}. {subject} (angle {rng.randint(1, 999)})")
            else:
                opener = _MOCK_OPENERS[rng.randrange(len(_MOCK_OPENERS))]
                lines.append(f"{i}. {opener} {subject} (variant {rng.randint(1, 999)})?")
        return "\n".join(lines)

    def _question_line(self, rng: random.Random) -> str:
        opener = _MOCK_OPENERS[rng.randrange(len(_MOCK_OPENERS))]
        subject = _MOCK_SUBJECTS[rng.randrange(len(_MOCK_SUBJECTS))]
        return f"{opener} {subject} (variant {rng.randint(1, 999)})?"

    def _answer_text(self, rng: random.Random, max_tokens: int) -> str:
        vocabulary = (
            "yes", "no", "mostly", "specifically", "looking", "for", "details",
            "about", "that", "topic", "please", "focus", "on", "the", "practical",
            "side", "of", "it", "thanks", "mainly", "interested", "in",
        )
        n_tokens = max(1, min(max_tokens, rng.randint(3, max_tokens)))
        words = [vocabulary[rng.randrange(len(vocabulary))] for _ in range(n_tokens)]
        return " ".join(words)


def _extract_int(text: str, pattern: str, default: int) -> int:
    match = re.search(pattern, text)
    return int(match.group(1)) if match else default


class LiveProvider:
    """Chat-completion wire client; endpoint and key come from the environment."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
    ):
        self.base_url = (base_url or os.environ.get("AGENTCQ_API_BASE", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("AGENTCQ_API_KEY", "")
        self.timeout_s = timeout_s
        if not self.base_url:
            raise ValidationError(
                "live provider requires AGENTCQ_API_BASE (or explicit base_url)"
            )

    def complete_once(
        self, prompt: str, params: GenerationParams, template_id: str | None = None
    ) -> str:
        payload: dict = {
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
            "frequency_penalty": params.frequency_penalty,
            "presence_penalty": params.presence_penalty,
        }
        if params.top_k is not None:
            payload["top_k"] = params.top_k
        request = urllib.request.Request(
            f"{self.base_url}/chat/completions",
            data=json.dumps(payload).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                body = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (408, 429, 500, 502, 503, 504):
                raise TransientProviderError(f"HTTP {exc.code} from provider") from exc
            raise GatewayError(f"provider rejected request: HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError) as exc:
            raise TransientProviderError(f"transport failure: {exc}") from exc

        choices = body.get("choices") or []
        if not choices:
            raise ProviderRefusal("provider returned no choices")
        choice = choices[0]
        if choice.get("finish_reason") == "content_filter":
            raise ProviderRefusal("provider refused the prompt (content filter)")
        content = (choice.get("message") or {}).get("content")
        if not content:
            raise ProviderRefusal("provider returned empty content")
        return content


class Gateway:
    """Validates, caches, retries, rate-bounds, and logs every model call."""

    def __init__(
        self,
        provider,
        *,
        max_concurrency: int = 8,
        retry_budget: int = 3,
        backoff_base_s: float = 0.25,
        backoff_cap_s: float = 8.0,
        jitter_seed: int = 0,
        cache_enabled: bool = True,
        sleep_fn: Callable[[float], None] | None = None,
    ):
        if max_concurrency < 1:
            raise ValidationError("max_concurrency must be >= 1")
        if retry_budget < 1:
            raise ValidationError("retry_budget must be >= 1")
        self.provider = provider
        self.retry_budget = retry_budget
        self.backoff_base_s = backoff_base_s
        self.backoff_cap_s = backoff_cap_s
        self._jitter = random.Random(jitter_seed)
        self._sleep = sleep_fn if sleep_fn is not None else time.sleep
        self._semaphore = threading.BoundedSemaphore(max_concurrency)
        self._cache_enabled = cache_enabled
        self._cache: dict[str, str] = {}
        self._log: list[CallRecord] = []
        self._lock = threading.Lock()

    @property
    def call_log(self) -> list[CallRecord]:
        with self._lock:
            return list(self._log)

    def calls_for_template(self, template_id: str) -> list[CallRecord]:
        return [r for r in self.call_log if r.template_id == template_id]

    def complete(
        self,
        prompt: str,
        params: GenerationParams,
        *,
        template_id: str | None = None,
    ) -> str:
        """Return the provider's completion for ``prompt``.

        Identical (prompt, params, model) requests within a run are served
        from the cache without re-billing the provider.
        """
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        key = hashlib.sha256(
            ("\x1f".join((prompt, params.canonical(), params.model_name))).encode("utf-8")
        ).hexdigest()

        if self._cache_enabled:
            with self._lock:
                cached = self._cache.get(key)
            if cached is not None:
                self._append_log(
                    CallRecord(
                        request_id=key[:16],
                        template_id=template_id,
                        prompt=prompt,
                        params=params.canonical(),
                        response=cached,
                        attempts=0,
                        latency_s=0.0,
                        cached=True,
                    )
                )
                return cached

        start = time.monotonic()
        attempts = 0
        last_error: Exception | None = None
        response: str | None = None
        with self._semaphore:
            while attempts < self.retry_budget:
                attempts += 1
                try:
                    response = self.provider.complete_once(
                        prompt, params, template_id=template_id
                    )
                    break
                except ProviderRefusal:
                    self._append_log(
                        CallRecord(
                            request_id=key[:16],
                            template_id=template_id,
                            prompt=prompt,
                            params=params.canonical(),
                            response="",
                            attempts=attempts,
                            latency_s=time.monotonic() - start,
                            error="refusal",
                        )
                    )
                    raise
                except TransientProviderError as exc:
                    last_error = exc
                    if attempts < self.retry_budget:
                        delay = min(
                            self.backoff_cap_s,
                            self.backoff_base_s * (2 ** (attempts - 1)),
                        )
                        with self._lock:
                            delay *= 0.5 + self._jitter.random()
                        self._sleep(delay)

        latency = time.monotonic() - start
        if response is None:
            self._append_log(
                CallRecord(
                    request_id=key[:16],
                    template_id=template_id,
                    prompt=prompt,
                    params=params.canonical(),
                    response="",
                    attempts=attempts,
                    latency_s=latency,
                    error=str(last_error),
                )
            )
            raise TransportError(
                f"provider failed after {attempts} attempts: {last_error}",
                attempts=attempts,
            )

        if self._cache_enabled:
            with self._lock:
                self._cache[key] = response
        self._append_log(
            CallRecord(
                request_id=key[:16],
                template_id=template_id,
                prompt=prompt,
                params=params.canonical(),
                response=response,
                attempts=attempts,
                latency_s=latency,
            )
        )
        return response

    def _append_log(self, record: CallRecord) -> None:
        with self._lock:
            self._log.append(record)


def parse_integer_rating(text: str, *, low: int = 1, high: int = 10) -> int:
    """Extract one integer rating from a judge response.

    Prefers a number following a "score"/"rating" label, then the first
    standalone number. Fractional values are rejected rather than rounded; a
    missing or out-of-range number is an error carrying the raw text.
    """
    match = re.search(r"(?:score|rating)\s*(?:is|[:=])?\s*(\d+)(?:\.(\d+))?", text, re.I)
    if not match:
        match = re.search(r"(?<![\d.])(\d+)(?:\.(\d+))?", text)
    if not match:
        raise ParseError(f"no numeric rating found in response: {text!r}", raw_text=text)
    if match.group(2) is not None and int(match.group(2)) != 0:
        raise ParseError(
            f"fractional rating {match.group(0)!r} rejected (integer expected)",
            raw_text=text,
        )
    value = int(match.group(1))
    if not low <= value <= high:
        raise ParseError(
            f"rating {value} outside {low}..{high} in response: {text!r}", raw_text=text
        )
    return value


def save_call_log(
    gateway: Gateway, path, *, run_id: str, stage: str, config_digest: str = ""
):
    """Persist the call log as a line-delimited stage artifact."""
    from . import ingest

    ingest.register_record_type("call_record", CallRecord)
    return ingest.write_stage(
        gateway.call_log, path, run_id=run_id, stage=stage, config_digest=config_digest
    )
