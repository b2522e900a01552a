"""Exception types shared across the package."""


class PlatoonError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PlatoonError):
    """A physical or numerical parameter is outside its admissible range."""


class ConditionError(PlatoonError):
    """An analytic existence condition on the gain design is violated."""


class DomainError(PlatoonError):
    """An input is outside the domain where a branch or map is defined."""


class UndefinedRatioError(PlatoonError):
    """A signal-norm ratio has a zero denominator."""


class InconclusiveError(PlatoonError):
    """Numerics failed on every probe, so feasibility is undecided."""


class ScenarioError(PlatoonError):
    """A scenario file is malformed or contains unknown/invalid entries."""
