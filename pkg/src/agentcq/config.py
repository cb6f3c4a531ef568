"""Run configuration: defaults, config-file parsing, overrides, digests,
and per-stage seed derivation.

The config file is plain text with dotted keys ("filter.alpha = 0.4");
every key can also be overridden on the command line. The digest of the
fully resolved mapping is recorded in each stage manifest so artifacts are
traceable to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

DEFAULTS: dict[str, str] = {
    "run.seed": "7",
    "run.id": "run-1",
    "run.out_dir": "runs/out",
    "run.topics": "5",
    "data.clariq_dir": "data/clariq",
    "data.split": "train",
    "data.corpus": "",
    "data.qrels": "",
    "data.negative_grades": "clamp",
    "provider.kind": "mock",
    "provider.max_concurrency": "8",
    "provider.retry_budget": "3",
    "provider.log_calls": "false",
    "models.facet_generation": "mock-model",
    "models.question_generation": "mock-model",
    "models.filtering": "mock-model",
    "models.simulation": "mock-model",
    "models.judge": "mock-model",
    "models.category": "mock-model",
    "generation.strategies": "facet_based,temperature_variation,baseline",
    "generation.n_facets": "40",
    "generation.n_sets": "3",
    "generation.set_size": "10",
    "generation.baseline_n": "10",
    "filter.alpha": "0.4",
    "filter.top_k": "10",
    "simulate.parameterized": "true",
    "simulate.include_human_questions": "true",
    "judge.temperatures": "0.2,0.5,0.7",
    "judge.max_questions": "40",
    "judge.max_pairs": "60",
    "analysis.include_human": "true",
    "analysis.classify_categories": "true",
    "retrieval.k1": "0.9",
    "retrieval.b": "0.4",
    "retrieval.strategy": "query_question_answer",
    "retrieval.gain": "exponential",
    "retrieval.rerank_endpoint": "",
    "retrieval.rerank_depth": "100",
    "retrieval.cutoff": "100",
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read "dotted.key = value" lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {line_no} is not 'key = value': {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class PipelineConfig:
    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(
        cls,
        config_path: str | Path | None = None,
        overrides: dict[str, str] | None = None,
    ) -> "PipelineConfig":
        values = dict(DEFAULTS)
        if config_path:
            values.update(parse_config_file(config_path))
        for key, value in (overrides or {}).items():
            values[key] = value
        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        config = cls(values)
        config.validate()
        return config

    # -- typed accessors ---------------------------------------------------

    def get(self, key: str) -> str:
        if key not in self.values:
            raise ValidationError(f"unknown config key: {key}")
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError:
            raise ValidationError(f"config {key} must be an integer") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError:
            raise ValidationError(f"config {key} must be a number") from None

    def get_bool(self, key: str) -> bool:
        value = self.get(key).lower()
        if value in ("true", "1", "yes"):
            return True
        if value in ("false", "0", "no"):
            return False
        raise ValidationError(f"config {key} must be true/false")

    def get_list(self, key: str) -> list[str]:
        raw = self.get(key)
        return [item.strip() for item in raw.split(",") if item.strip()]

    def get_float_list(self, key: str) -> list[float]:
        return [float(item) for item in self.get_list(key)]

    # -- validation and derivation ------------------------------------------

    def validate(self) -> None:
        if self.get("provider.kind") not in ("mock", "live"):
            raise ValidationError("provider.kind must be 'mock' or 'live'")
        alpha = self.get_float("filter.alpha")
        if not 0.0 <= alpha <= 1.0:
            raise ValidationError("filter.alpha out of range [0, 1]")
        if self.get_int("filter.top_k") < 1:
            raise ValidationError("filter.top_k must be >= 1")
        if self.get_int("generation.n_sets") < 1:
            raise ValidationError("generation.n_sets must be >= 1")
        if self.get_int("generation.set_size") < 1:
            raise ValidationError("generation.set_size must be >= 1")
        if self.get_int("generation.n_facets") < 1:
            raise ValidationError("generation.n_facets must be >= 1")
        for temp in self.get_float_list("judge.temperatures"):
            if not 0.0 <= temp <= 2.0:
                raise ValidationError("judge temperature out of range [0, 2]")
        strategies = self.get_list("generation.strategies")
        for strategy in strategies:
            if strategy not in ("facet_based", "temperature_variation", "baseline"):
                raise ValidationError(f"unknown generation strategy {strategy!r}")
        if self.get("retrieval.strategy") not in (
            "query_only",
            "query_answer",
            "query_question_answer",
        ):
            raise ValidationError("invalid retrieval.strategy")
        if self.get("data.negative_grades") not in ("error", "clamp"):
            raise ValidationError("data.negative_grades must be 'error' or 'clamp'")

    def digest(self) -> str:
        canonical = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def stage_seed(self, stage: str) -> int:
        material = f"{self.get_int('run.seed')}:{stage}"
        digest = hashlib.sha256(material.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")

    def out_path(self, name: str) -> Path:
        return Path(self.get("run.out_dir")) / name
