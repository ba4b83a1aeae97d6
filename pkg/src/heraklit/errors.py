"""Exception hierarchy shared by all heraklit modules."""

from __future__ import annotations


class HeraklitError(Exception):
    """Base class for every error raised by this package."""


class SortError(HeraklitError):
    """A term or value does not fit the sort it is used at."""


class EvaluationError(HeraklitError):
    """A term could not be evaluated (unbound variable, missing table entry)."""


class ModelError(HeraklitError):
    """A model failed validation; ``violations`` lists the reasons."""

    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        self.violations = list(violations or [])
        if self.violations:
            message = message + ": " + "; ".join(self.violations)
        super().__init__(message)


class FiringError(HeraklitError):
    """A transition was fired under a binding that is not enabled."""


class CompositionError(HeraklitError):
    """Two modules cannot be composed, or a module cannot be flattened."""


class DSLError(HeraklitError):
    """Syntax or resolution error in model source text, with location."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        self.line = line
        self.column = column
        self.bare_message = message
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class RunError(HeraklitError):
    """A recorded run is corrupt (for instance its causal order has a cycle)."""
