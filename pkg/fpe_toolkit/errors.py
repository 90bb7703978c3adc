"""This module contains the exceptions raised by the library.

Every exception carries the exit code the command line interface
returns when the exception is not handled.

Classes
-------
FpeError
    Base class for all library errors.
ShapeError
    Raised on a dimension mismatch.
InputError
    Raised when a precondition on the arguments is violated.
StateError
    Raised when an object is used in an inconsistent state.
FormatError
    Raised when a file does not follow its format.
NumericError
    Raised when a computation produces non-finite values.
ConfigError
    Raised when an experiment configuration is invalid.
"""

from __future__ import annotations

from .enums import ExitCode

__all__ = (
    "FpeError",
    "ShapeError",
    "InputError",
    "StateError",
    "FormatError",
    "NumericError",
    "ConfigError",
)


class FpeError(Exception):
    """Base class for all library errors."""

    exit_code: ExitCode = ExitCode.CONFIG_ERROR


class ShapeError(FpeError, ValueError):
    """Raised on a dimension mismatch."""


class InputError(FpeError, ValueError):
    """Raised when a precondition on the arguments is violated."""


class StateError(FpeError, RuntimeError):
    """Raised when an object is used in an inconsistent state."""


class FormatError(FpeError, ValueError):
    """Raised when a file does not follow its format.

    Attributes
    ----------
    offset: :class:`int` | :class:`None`
        The byte offset at which parsing failed, if known.
    """

    exit_code = ExitCode.FORMAT_ERROR

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(FpeError, ArithmeticError):
    """Raised when a computation produces non-finite values.

    Attributes
    ----------
    epoch: :class:`int` | :class:`None`
        The training epoch, when raised during training.
    batch: :class:`int` | :class:`None`
        The batch index within the epoch, when raised during training.
    """

    exit_code = ExitCode.NUMERIC_ERROR

    def __init__(
        self, message: str, epoch: int | None = None, batch: int | None = None
    ) -> None:
        if epoch is not None:
            message = f"{message} (epoch {epoch}, batch {batch})"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ConfigError(FpeError, ValueError):
    """Raised when an experiment configuration is invalid."""
