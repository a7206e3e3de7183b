"""Shared exception types.

Every hard numerical guard in the package raises one of these, so callers
(and the CLI exit-code mapping) can tell configuration mistakes apart from
resolution problems.
"""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateParams(ValueError):
    """Parameter combination for which the requested quantity is undefined."""


class DegenerateOutcome(ValueError):
    """Conditioning on a measurement outcome of (numerically) zero probability."""


class OverflowGuard(ValueError):
    """Combinatorial input large enough to overflow exact integer weights."""


class TruncationError(RuntimeError):
    """A truncated basis or integration window fails its accuracy audit."""


class NonRealError(RuntimeError):
    """A quantity that must be real carries a non-negligible imaginary part."""


class StepFailure(RuntimeError):
    """Adaptive integration could not proceed within its step-size budget."""


class NegativityWarning(UserWarning):
    """A distribution that should be non-negative dips below the audit floor."""
