"""Exception hierarchy.

Every error raised on purpose by the library derives from ``BetaFrameError``.
``PreconditionError`` groups the mathematical precondition failures (the CLI
maps them to exit code 2); ``DimMismatch`` and ``BadShape`` are also
``ValueError`` so callers that only know numpy conventions still catch them.
"""


class BetaFrameError(Exception):
    """Base class for all library errors."""


class PreconditionError(BetaFrameError):
    """A mathematical precondition of an operation does not hold."""


class RankDeficient(PreconditionError):
    """A matrix that must have full column rank does not (sigma_min ~ 0)."""


class NotAdmissible(PreconditionError):
    """Quantizer parameters lie outside the stability region."""


class InputOutOfRange(PreconditionError):
    """An input vector exceeds the bound the quantizer was designed for."""


class AlphaTooSmall(PreconditionError):
    """Decay exponent too small for the closed-form parameter choice."""


class BadBeta(PreconditionError):
    """A beta parameter is not strictly greater than one."""


class BadEps(PreconditionError):
    """Probability level outside (0, 1)."""


class OddSize(PreconditionError):
    """Harmonic semicircle constructions need an even frame size."""


class TooLarge(PreconditionError):
    """Brute-force enumeration would exceed its guard."""


class BadShape(PreconditionError, ValueError):
    """Incompatible sizes (e.g. fewer frame vectors than dimensions)."""


class DimMismatch(PreconditionError, ValueError):
    """Operand dimensions do not agree."""
