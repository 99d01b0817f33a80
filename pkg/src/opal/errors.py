"""Exception taxonomy for the opal pipeline.

``exit_code`` follows the CLI contract: 2 for input/validation problems,
3 for LLM-backend failures, 4 for unparseable model responses.
"""

from __future__ import annotations


class OpalError(Exception):
    exit_code = 1


# ---------------------------------------------------------------------------
# Input / validation errors (exit code 2)
# ---------------------------------------------------------------------------

class InputError(OpalError):
    exit_code = 2


class IoError(InputError):
    pass


class EncodingError(InputError):
    pass


class EmptySourceError(InputError):
    pass


class SchemaError(InputError):
    pass


class ParseError(InputError):
    pass


class NonPositivePeakError(SchemaError):
    pass


class NegativeCountError(SchemaError):
    pass


class TooFewRunsError(SchemaError):
    pass


class EmptySamplesError(InputError):
    pass


class EmptyImportanceError(InputError):
    pass


class SourceMissingError(InputError):
    pass


class PromptTooLargeError(InputError):
    pass


class ConfigError(InputError):
    pass


# ---------------------------------------------------------------------------
# Backend errors (exit code 3)
# ---------------------------------------------------------------------------

class BackendError(OpalError):
    exit_code = 3


class AuthError(BackendError):
    pass


class RateLimitedError(BackendError):
    pass


class TransportError(BackendError):
    pass


class TruncatedOutputError(BackendError):
    pass


class MissingLogprobsError(BackendError):
    """Backend returned a completion without the requested token logprobs.

    Carries the completion so callers can keep the text and degrade to
    "no belief report" mode instead of discarding the response.
    """

    def __init__(self, message: str, completion=None):
        super().__init__(message)
        self.completion = completion


# ---------------------------------------------------------------------------
# Model-response format errors (exit code 4)
# ---------------------------------------------------------------------------

class ResponseFormatError(OpalError):
    exit_code = 4


class NoCodeBlockError(ResponseFormatError):
    pass


class MalformedOptimizationListError(ResponseFormatError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


# ---------------------------------------------------------------------------
# Pipeline stage wrapper
# ---------------------------------------------------------------------------

class StageError(OpalError):
    """Any stage failure, wrapped with the name of the failing stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


class OpalWarning(UserWarning):
    pass


class DegenerateMatrixWarning(OpalWarning):
    pass
