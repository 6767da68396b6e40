"""Exception hierarchy shared by every module."""


class MechanismError(Exception):
    """Base class for all errors raised by travelmech."""


class StructuralError(MechanismError, ValueError):
    """Graph or route structure is inconsistent (dangling endpoints, unknown edges)."""


class InvalidAttributeError(MechanismError, ValueError):
    """An attribute value violates its invariant (capacity <= 0, duplicate id, ...)."""


class DomainError(MechanismError, ValueError):
    """Argument outside the domain of a function."""


class InfeasibleError(MechanismError):
    """The centralized problem has an empty feasible region."""


class NonConvergenceError(MechanismError):
    """Iteration cap reached without a valid KKT certificate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OracleScopeError(MechanismError):
    """Instance too large for exhaustive enumeration."""


class PreconditionError(MechanismError):
    """Caller violated a documented precondition."""


class ScenarioParseError(MechanismError, ValueError):
    """Scenario or profile file could not be parsed."""


class GenerationError(MechanismError):
    """A random-scenario size specification cannot be satisfied."""


class UsageError(MechanismError):
    """Unknown suite or bad command-line combination."""
