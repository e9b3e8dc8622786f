"""Exception types shared across the library."""


class SuperblochError(Exception):
    """Base class for all errors raised by this package."""


class HermiticityError(SuperblochError):
    """A matrix required to be self-adjoint is not, within tolerance."""


class GapViolationError(SuperblochError):
    """An eigenvalue sits too close to (or on) an integration contour."""


class SingularResolventError(SuperblochError):
    """Resolvent requested at a point of (or too near) the spectrum."""


class NotPositiveDefiniteError(SuperblochError):
    """Matrix passed to an SPD-only routine has an eigenvalue below tolerance.

    In the projector construction this signals that epsilon is too large
    for the requested expansion order.
    """


class TruncationError(SuperblochError):
    """Fourier support of the potential exceeds the representable couplings."""


class CapabilityError(SuperblochError):
    """A derivative order beyond what the driving profile supports."""


class NoGapError(SuperblochError):
    """The selected band is not isolated from the rest of the spectrum."""


class AccuracyError(SuperblochError):
    """A quadrature or convergence loop failed to reach its tolerance."""


class BandTrackingError(SuperblochError):
    """Rank of the band projector changed between collocation nodes."""


class InstabilityError(SuperblochError):
    """Hermiticity drift beyond tolerance before symmetrization.

    Signals that the collocation grid or contour quadrature is too coarse
    for the requested expansion order.
    """


class EpsilonTooLargeError(SuperblochError):
    """Spectral splitting of the truncated expansion failed.

    The eigenvalues of the partial sum no longer cluster near 0 and 1 with
    the required margin, so no projector can be split off at this epsilon.
    """

    def __init__(self, message, s=None, eigenvalue=None):
        super().__init__(message)
        self.s = s
        self.eigenvalue = eigenvalue


class ResourceError(SuperblochError):
    """A step-count or node-count budget was exceeded."""


class ConfigurationError(SuperblochError):
    """Inconsistent inputs: mismatched grids, bad config values, etc."""
