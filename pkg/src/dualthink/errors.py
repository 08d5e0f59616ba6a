"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DualThinkError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DualThinkError):
    """A configuration or domain-type invariant is violated."""


class TemplateError(DualThinkError):
    """A prompt template references a placeholder that was not supplied."""


class ParseError(DualThinkError):
    """A structured completion could not be parsed into a valid payload.

    ``reason`` is a machine-readable sentence that is fed back verbatim into
    the retry prompt; ``agent`` identifies the stage once known.
    """

    def __init__(self, reason: str, agent: str | None = None):
        self.reason = reason
        self.agent = agent
        super().__init__(reason if agent is None else f"[{agent}] {reason}")


class BackendError(DualThinkError):
    """Transport-level or protocol-level failure when calling a model."""

    def __init__(self, message: str, agent: str | None = None):
        self.agent = agent
        super().__init__(message)


class BackendTimeout(BackendError):
    """The request timed out and the retry budget is spent."""


class BackendHTTPError(BackendError):
    """The server answered with a non-retryable (or final) HTTP error."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(message or f"HTTP {status}")


class BackendExhausted(BackendError):
    """No attempt succeeded: retries spent, or a scripted backend ran dry."""


class IngestError(DualThinkError):
    """A corpus violates ingestion rules (duplicate id, empty text, ...)."""


class FormatError(DualThinkError):
    """A dataset file line is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
