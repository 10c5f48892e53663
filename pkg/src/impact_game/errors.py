"""Exception hierarchy.

Validation problems derive from :class:`ValidationError`; failures of the
numerical machinery (loss of concavity, singular best-response systems,
non-convergent oracles) derive from :class:`NumericalError`.  The CLI maps
the two families to distinct exit codes.
"""


class ImpactGameError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ImpactGameError, ValueError):
    """A configuration violates a parameter invariant."""


class Assumption32Violated(ValidationError):
    """Impact friction condition ``alpha_t * exp(-rho) + beta_t < 1`` fails."""

    def __init__(self, t, value):
        self.t = t
        self.value = value
        super().__init__(
            f"Assumption 3.2 violated at t={t}: "
            f"alpha*exp(-rho) + beta = {value:.6g} >= 1"
        )


class NonPositive(ValidationError):
    def __init__(self, field, detail=""):
        self.field = field
        msg = f"{field} has an out-of-range value"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class LengthMismatch(ValidationError):
    def __init__(self, field, got, expected):
        self.field = field
        super().__init__(f"{field} has length {got}, expected T={expected}")


class ParseError(ValidationError):
    """Malformed scenario file.  ``line`` is set for JSON syntax errors."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class TimeOutOfRange(ImpactGameError, IndexError):
    def __init__(self, t, T):
        self.t = t
        super().__init__(f"time index {t} outside 1..{T}")


class NumericalError(ImpactGameError, ArithmeticError):
    """The closed-form machinery or an oracle hit a numerical dead end."""


class NotPositiveDefinite(NumericalError):
    pass


class ConcavityLost(NumericalError):
    def __init__(self, t, trader, A):
        self.t = t
        self.trader = trader
        self.A = A
        super().__init__(
            f"stage objective of trader {trader} at t={t} is not strictly "
            f"concave (A={A:.6g} <= 0)"
        )


class SingularEquilibrium(NumericalError):
    def __init__(self, t, zeta):
        self.t = t
        self.zeta = zeta
        super().__init__(f"best-response system singular at t={t} (zeta={zeta})")


class NoConvergence(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class IntegrandOverflow(NumericalError):
    pass


class InventoryLeak(NumericalError):
    pass


class EmptySample(ImpactGameError, ValueError):
    pass
