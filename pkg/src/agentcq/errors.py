"""Exception types shared across the pipeline."""


class AgentCQError(Exception):
    """Base class for all package errors."""


class ValidationError(AgentCQError, ValueError):
    """A value violates a domain invariant."""


class ParseError(AgentCQError, ValueError):
    """A model response or data line could not be parsed.

    Carries the offending raw text so failures can be inspected offline.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class DataFormatError(AgentCQError, ValueError):
    """A data file is malformed (bad column, bad line, bad schema version)."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class GatewayError(AgentCQError):
    """Base class for model-call failures."""


class TransportError(GatewayError):
    """Transport-level failure that exhausted the retry budget."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ProviderRefusal(GatewayError):
    """The provider declined to produce a completion; never retried."""


class StatisticUndefinedError(AgentCQError, ValueError):
    """A statistic is undefined for the given input (degenerate case)."""
