"""Exception hierarchy shared by all oscillab modules."""


class OscillabError(Exception):
    """Base class for every error raised by the package."""


class MalformedSpecError(OscillabError, ValueError):
    """A potential specification violates its structural invariants."""


class InvalidOrderError(OscillabError, ValueError):
    """A truncation order is out of range."""


class DomainError(OscillabError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class InvalidModeError(OscillabError, ValueError):
    """Index parity or range violation for a radial mode."""


class UnsupportedPrecisionError(OscillabError, ValueError):
    """Exact rational evaluation requested for a non-rational input."""


class UnsupportedError(OscillabError, ValueError):
    """The operation needs data the input does not carry."""


class NumericalFailure(OscillabError, RuntimeError):
    """A numerical kernel failed to converge or lost all accuracy.

    ``diagnostics`` holds whatever the failing kernel could report.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TruncationWindowError(OscillabError, ValueError):
    """The Laguerre basis window is too small for the requested jet order."""

    def __init__(self, message, required_M):
        super().__init__(message)
        self.required_M = required_M


class BranchAmbiguityError(NumericalFailure):
    """Two eigenvalues collide while continuing a branch in epsilon."""

    def __init__(self, message, pair, eps):
        super().__init__(message, {"pair": pair, "eps": eps})
        self.pair = pair
        self.eps = eps


class IntegratorFailure(NumericalFailure):
    """The radial ODE integrator did not meet its tolerance."""


class RangeError(OscillabError, ValueError):
    """A radial solution does not extend far enough for the requested fit."""


class DegenerateLeadError(OscillabError, ValueError):
    """V''(0) = 0, so the leading term of the energy expansion vanishes."""


class DegenerateInputError(OscillabError, ValueError):
    """A spherical combination has no nonzero coefficient."""


class DistinctnessError(OscillabError, ValueError):
    """Two contributing angular sectors share the same perturbed energy."""

    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair
