"""Exception types shared across the toolkit."""

from __future__ import annotations


class PrivakitError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(PrivakitError, ValueError):
    """A scalar argument is out of its documented range."""


class ShapeError(PrivakitError, ValueError):
    """Operands disagree in dimensions, or a geometry is degenerate."""


class EmptyCropError(PrivakitError, ValueError):
    """A crop box does not intersect the image at all."""


class VocabularyError(PrivakitError, ValueError):
    """An attribute value is not present in any registered vocabulary."""


class PromptSpecError(PrivakitError, ValueError):
    """A prompt spec is inconsistent with its level or strategy."""


class DegenerateVarianceError(PrivakitError, ValueError):
    """Reliability is undefined because total score variance is zero."""


class ProtocolError(PrivakitError, RuntimeError):
    """A backend answered with a malformed or mismatched payload."""


class TransportError(PrivakitError, RuntimeError):
    """A backend call failed at the transport level; retriable.

    Carries the pipeline stage (backend role) at which the failure happened.
    """

    def __init__(self, message: str, stage: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ValidationError(PrivakitError, ValueError):
    """A service request failed validation."""


class ConflictError(PrivakitError, ValueError):
    """A submission conflicts with an already-stored record."""


class NotFoundError(PrivakitError, KeyError):
    """An entity id does not exist."""
