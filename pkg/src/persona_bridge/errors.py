"""Exception hierarchy.

Every error carries the process exit code the CLI should use when it
escapes to the top level.
"""

from __future__ import annotations


class PersonaBridgeError(Exception):
    exit_code = 1


class ConfigError(PersonaBridgeError):
    exit_code = 2


class ProviderError(PersonaBridgeError):
    """A chat or embedding backend failed to produce a usable answer."""

    exit_code = 3
    retryable = False


class NetworkError(ProviderError):
    retryable = True


class ProviderTimeoutError(ProviderError):
    retryable = True


class ProviderHTTPError(ProviderError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned HTTP {status}: {body[:500]}")
        self.status = status
        self.body = body
        self.retryable = status == 429 or status >= 500


class MissingFixtureError(ProviderError):
    def __init__(self, key_hash: str):
        super().__init__(f"no fixture recorded for message hash {key_hash}")
        self.key_hash = key_hash


class ValidationError(PersonaBridgeError, ValueError):
    exit_code = 4


class InvalidSchemaError(ValidationError):
    pass


class InvalidProfileError(ValidationError):
    pass


class UnknownRelationTypeError(ValidationError):
    def __init__(self, label):
        super().__init__(f"unknown relation type: {label!r}")
        self.label = label


class EmptyConceptError(ValidationError):
    pass


class MalformedExtractionError(ValidationError):
    pass


class UnknownNodeError(ValidationError, KeyError):
    def __str__(self) -> str:
        return f"unknown node: {self.args[0]!r}"


class ProtocolViolationError(ValidationError):
    pass


class InferenceParseError(ValidationError):
    pass


class UndefinedSimilarityError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class InsufficientRunsError(ValidationError):
    pass


class StageError(PersonaBridgeError):
    """A pipeline stage failed; wraps the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
