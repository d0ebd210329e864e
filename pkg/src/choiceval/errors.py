"""Exception types shared across the toolkit."""


class ChoicevalError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ChoicevalError):
    """Invalid configuration: missing coefficients, bad options, bad draw plans."""


class InputError(ChoicevalError, ValueError):
    """Invalid input data: empty datasets, malformed rows, out-of-range arguments."""


class NumericError(ChoicevalError, ArithmeticError):
    """Non-finite values where finite numbers are required."""


class DomainError(ChoicevalError, ValueError):
    """A derived quantity is undefined for the given estimates (e.g. WTP with a
    non-negative cost coefficient)."""


class IdentificationError(ChoicevalError):
    """A parameter cannot be identified from the data (no within-task variation,
    singular information matrix)."""


class RankError(IdentificationError):
    """Singular Hessian / information matrix at the solution."""


class NonConvergenceError(ChoicevalError):
    """Optimizer failed to reach the gradient tolerance."""


class SeparationError(NonConvergenceError):
    """Perfect separation: the likelihood has no interior maximum.

    ``culprit`` names the separating covariate when it can be determined.
    """

    def __init__(self, message: str, culprit: str | None = None):
        super().__init__(message)
        self.culprit = culprit
