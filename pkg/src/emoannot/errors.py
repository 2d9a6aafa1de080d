"""Error types shared across the toolkit.

Each class maps 1:1 onto one API error code so the HTTP layer can translate
failures without inspecting messages.
"""


class NotFoundError(KeyError):
    """Requested session / blob / target does not exist."""


class ConflictError(Exception):
    """Write collides with existing state (e.g. same session id, different payload)."""


class InvalidInputError(ValueError):
    """Caller violated an operation precondition."""


class ParseError(InvalidInputError):
    """Source file does not match its declared format."""


class IllegalTransitionError(Exception):
    """Verification state machine does not allow the requested action."""


class ProviderTransportError(Exception):
    """LLM provider call failed at the transport level (retryable)."""
