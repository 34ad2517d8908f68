"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class NoSolutionError(ValueError):
    """A monotone equation has no solution on the search domain."""


class DivergenceError(RuntimeError):
    """A root bracket could not be found within the allowed range."""


class BudgetExceededError(RuntimeError):
    """An exhaustive search would evaluate more models than allowed."""

    def __init__(self, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(
            f"collection holds {count} models, exceeding the search budget of {budget}"
        )


class SaturatedFitError(ArithmeticError):
    """The residual sum of squares is too small for a log criterion."""


class HypothesisError(ValueError):
    """A collection violates a precondition required by a selection rule."""


class DataFormatError(ValueError):
    """An input file is malformed; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
