"""Exception types shared across the package."""


class LiouvilleError(Exception):
    """Base class for all package errors."""


class ConfigError(LiouvilleError):
    """Malformed configuration input; the message names the offending field."""


class TopologyViolation(LiouvilleError):
    """The solvability inequality sum(2*eta) + n_parabolic + 2g - 2 > 0 fails."""


class InvalidWeight(LiouvilleError):
    """A conical weight eta lies outside the open interval (0, 1/2)."""


class CoincidentSources(LiouvilleError):
    """Two source positions closer than the minimum separation."""


class InvalidGrid(LiouvilleError):
    """Grid geometry incompatible with the requested chart."""


class ParabolicMassExcess(LiouvilleError):
    """Fixed cusp-patch mass exhausts the density mass budget."""


class QuadratureFailure(LiouvilleError):
    """A quadrature produced a non-finite value."""


class RBoundViolation(LiouvilleError):
    """The ratio r = e^v / beta left (0, inf) on the grid."""


class NonFiniteIterate(LiouvilleError):
    """An iterate overflowed (typically exp of an unbounded field)."""


class EvaluationAtSingularity(LiouvilleError):
    """Pointwise evaluation requested at (or too close to) a source position."""


class NoConvergence(LiouvilleError):
    """Iteration budget exhausted; carries the best iterate found."""

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}
