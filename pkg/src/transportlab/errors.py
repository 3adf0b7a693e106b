"""Exception types shared across the package."""


class TransportLabError(Exception):
    """Base class for all package-specific failures."""


class SpecError(TransportLabError, ValueError):
    """A manifold specification could not be parsed or validated."""


class DomainError(TransportLabError, ValueError):
    """A point (or a finite-difference stencil around it) leaves the chart domain.

    For mid-integration exits ``exit_s`` carries the last valid affine
    parameter value.
    """

    def __init__(self, message, exit_s=None):
        super().__init__(message)
        self.exit_s = exit_s


class SingularMetricError(TransportLabError, ValueError):
    """Metric determinant below the invertibility threshold."""


class MetricUnavailableError(TransportLabError, TypeError):
    """Metric-dependent operation requested on a connection-only model."""


class NotPositiveDefiniteError(TransportLabError, ValueError):
    """Orthonormal frame requested where the metric is not positive definite."""


class TrustRadiusError(TransportLabError, ValueError):
    """Jet evaluated at a displacement beyond its truncation trust radius."""


class ConvergenceError(TransportLabError, RuntimeError):
    """Iterative solve failed; for the two-point problem this means the
    target is outside the normal neighborhood of the base point."""


class ConjugatePointError(ConvergenceError):
    """Endpoint-map Jacobian (numerically) singular during shooting."""


class IllConditionedFitError(TransportLabError, RuntimeError):
    """Polynomial fit rejected because the design matrix condition number
    exceeds the trust threshold."""
