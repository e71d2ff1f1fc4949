"""Exception types raised across the package."""


class OmdissError(Exception):
    """Base class for all package errors."""


class ParameterError(OmdissError, ValueError):
    """Invalid or inconsistent model parameters."""


class ConfigError(OmdissError):
    """Malformed configuration file or override."""


class IntegrationError(OmdissError):
    """Base class for ODE integration failures."""


class StepSizeUnderflow(IntegrationError):
    """Adaptive step size dropped below the representable minimum."""


class NonFiniteState(IntegrationError):
    """The integrated state became NaN or infinite."""


class ZeroVariance(OmdissError):
    """A correlation window has a constant signal."""


class NoDominantPeak(OmdissError):
    """No spectral peak stands out from the background."""


class NoBracket(OmdissError):
    """A bisection range does not bracket the transition."""


class UnstableDrift(OmdissError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class IllConditioned(OmdissError):
    """A linear solve did not meet its residual bound."""


class UnphysicalCovariance(OmdissError):
    """A covariance matrix violates the uncertainty principle."""


class NegativeOccupancy(OmdissError):
    """Occupancy below zero beyond round-off: a normalization bug."""


class AllUnstable(OmdissError):
    """Every candidate point of an optimization was dynamically unstable."""


class UnphysicalSubmatrix(UnphysicalCovariance):
    """A reduced (two-mode) covariance violates the uncertainty principle."""
