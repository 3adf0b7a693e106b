"""Numerical laboratory for finite parallel transport on chart-local manifolds.

Builds geodesics, displacement-to-velocity jets, group-law and
integrated transports on a catalog of test geometries (plus user
metrics), and verifies the defining identities as quantitative
residuals.
"""

from .action import action_value, gradient_relation_residual, hj_residual
from .errors import (
    ConjugatePointError,
    ConvergenceError,
    DomainError,
    IllConditionedFitError,
    MetricUnavailableError,
    NotPositiveDefiniteError,
    SingularMetricError,
    SpecError,
    TransportLabError,
    TrustRadiusError,
)
from .geodesic import GeodesicPath, connect, first_integral, radial_probe, shoot
from .group import (
    GroupElementAt,
    aux_matrices,
    canonical_law_residuals,
    eval_K,
    frame_lambda_from_jet,
    gamma_coefficients,
    group_element,
    multiply,
    path_tangent_rule,
    reframe_jet,
)
from .jets import (
    DeformationJet,
    canonicity_residual,
    deformation_jet,
    exponential_jets,
    jet_from_log_samples,
    rho_coefficients,
)
from .manifold import (
    ConnectionCoefficients,
    CurvatureTensor,
    MetricModel,
    VielbeinFrame,
    christoffel,
    connection_model,
    expression_model,
    flat,
    halfplane,
    load_manifold,
    metric_at,
    polar_flat,
    riemann,
    sphere2,
    vielbein,
)
from .transport import (
    TransportMatrix,
    composition_defect,
    composition_residual,
    discrepancy_scaling,
    finite_transport,
    metric_compat_residual,
    ode_transport,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
