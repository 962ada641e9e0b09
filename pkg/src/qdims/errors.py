"""Exception types shared across the package."""


class InvalidWordError(ValueError):
    """A word's letters are incompatible with the branching profile."""


class DepthCapError(RuntimeError):
    """Cut-set expansion hit the enumeration depth cap.

    Carries the offending branch (when known) and the depth at which the
    expansion was abandoned.
    """

    def __init__(self, message, word=None, depth=None):
        super().__init__(message)
        self.word = word
        self.depth = depth


class BranchBudgetError(RuntimeError):
    """Word enumeration exceeded the configured word-count budget."""


class IncompleteSchemeError(KeyError):
    """An explicit translation table lacks a required word prefix."""


class SingularMatrixError(ValueError):
    """A matrix is numerically singular or too ill-conditioned to decompose."""


class InsufficientScalesError(ValueError):
    """Too few usable scales remain for a log-log dimension fit."""


class IndeterminateTrendError(RuntimeError):
    """A boundedness trend could not be classified; carries both brackets."""

    def __init__(self, message, bracket_lower=None, bracket_upper=None):
        super().__init__(message)
        self.bracket_lower = bracket_lower
        self.bracket_upper = bracket_upper


class ConfigError(ValueError):
    """An experiment configuration is inconsistent or unsupported."""
