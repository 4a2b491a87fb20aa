"""Exception types shared across the package."""


class SlitkitError(Exception):
    """Base class for all package errors."""


class OutOfDomain(SlitkitError):
    """Query point lies outside the geometry's domain of validity."""


class NonConvergence(SlitkitError):
    """An iterative solve failed to reach its tolerance."""


class OrderTooHigh(SlitkitError):
    """Requested jet order exceeds what the geometry supports."""


class SingularSystem(SlitkitError):
    """A coefficient linear system lost its triangular structure."""


class SingularMoments(SlitkitError):
    """Mollifier moment system is numerically singular."""


class MaskDegenerate(SlitkitError):
    """Slit mask is empty or covers the whole symmetry plane."""


class IllConditioned(SlitkitError):
    """Least-squares normal system too ill-conditioned to trust."""


class InsufficientResolution(SlitkitError):
    """Too few sample nodes at the smallest requested scale."""


class DegenerateWeight(SlitkitError):
    """The weight u_n changes sign on the evaluation set."""


class MultipleRoots(SlitkitError):
    """Coarse scan found more than one sign change; all roots attached."""


class NoBracket(SlitkitError):
    """No sign change of the residual inside the given bracket."""


class OutOfChart(SlitkitError):
    """Quadrature ball exits the tubular neighborhood of the interface."""


class SeriesUnresolved(SlitkitError):
    """Half-angle series truncation does not resolve the boundary data."""


class ConfigInvalid(SlitkitError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class TruncationWarning(UserWarning):
    """Half-angle series truncated before its tail is negligible."""
