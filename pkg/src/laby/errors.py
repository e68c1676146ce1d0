"""Errors raised by the compiler and runtimes."""

from __future__ import annotations


class LabyError(Exception):
    """Base class for all errors raised by this package."""


class DiagnosticError(LabyError):
    """An error with a source position, rendered as file:line:col: message."""

    def __init__(self, message, line, col, filename="<input>"):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(f"{filename}:{line}:{col}: {message}")


class LabyParseError(DiagnosticError):
    pass


class LabyTypeError(DiagnosticError):
    pass


class ProtocolError(LabyError):
    """A bag-transformation interface call sequence violation."""


class ExecutionError(LabyError):
    """A runtime failure while executing a program (bad input file, collision, ...)."""


class BudgetExceededError(ExecutionError):
    """The interpreter produced more elements than the configured budget."""


class DeadlockError(LabyError):
    """The parallel runtime quiesced without reaching program termination."""
