"""Exception hierarchy shared by all modules."""


class RoughwaveError(Exception):
    """Base class for every error raised by this package."""


class SignatureError(RoughwaveError):
    """A metric sample is not Lorentzian with signature (-,+,+,+)."""


class LapseBoundError(RoughwaveError):
    """The lapse left the interval [1/2, 2]."""


class OutOfDomainError(RoughwaveError):
    """A point lies outside [0, 1] x box."""


class DomainExitError(RoughwaveError):
    """A trajectory left the spatial box."""


class StepFailure(RoughwaveError):
    """An adaptive integrator could not meet its tolerance."""


class CausticError(RoughwaveError):
    """Characteristics of one optical function collided (focal point)."""


class DegenerateGradientError(RoughwaveError):
    """The spatial gradient of the optical function is (numerically) zero."""


class CoordinateCollisionError(RoughwaveError):
    """Two distinct points share the same (u, d_omega u) coordinates."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class AmbiguousMaximizerError(RoughwaveError):
    """Two separated local maxima of u(s,y,.) - u(t,x,.) agree within tolerance."""

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates or []


class GramSingularError(RoughwaveError):
    """The 2x2 Gram matrix g(d_omega N, d_omega N) is too ill-conditioned."""


class EndpointDefectError(RoughwaveError):
    """A connecting curve missed its target point."""


class BoundViolationError(RoughwaveError):
    """A lower bound on |phi| failed at some sample."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class UnderresolvedError(RoughwaveError):
    """Refining a quadrature rule changed the result beyond tolerance."""


class AdmissibilityError(RoughwaveError, ValueError):
    """(p, q) is not an admissible Strichartz pair."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class ConfigError(RoughwaveError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaMismatchError(RoughwaveError, ValueError):
    """A CSV report does not have the expected columns."""

    def __init__(self, column, message=None):
        super().__init__(message or f"schema mismatch at column {column!r}")
        self.column = column
