"""Finite (group-law) and infinitesimal (integrated) parallel transport.

Both constructions pull vectors back from a displaced point to the base
point: the finite transport applies the displacement derivative of the
deformation jet, the infinitesimal one integrates the transport system
along the geodesic and inverts the accumulated matrix.  Their radial
action (on the geodesic's own tangent) agrees to jet-truncation
accuracy; their action on arbitrary vectors is measured, not asserted,
and decays quadratically with separation on curved models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, SpecError
from .fd import fit_loglog_slope
from .geodesic import connect, radial_probe, shoot
from .jets import deformation_jet
from .manifold import metric_at

_DET_FLOOR = 1e-10


@dataclass(frozen=True)
class TransportMatrix:
    """Linear map between tangent spaces at two chart points."""

    from_point: np.ndarray
    to_point: np.ndarray
    matrix: np.ndarray
    kind: str  # lambda_jet | lambda_fd | ode | mu_fd

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise SpecError("transport matrix has non-finite entries")
        if abs(np.linalg.det(self.matrix)) <= _DET_FLOOR:
            raise SpecError("transport matrix numerically singular")

    def __matmul__(self, vec):
        return self.matrix @ vec


def ode_transport(model, path):
    """Integrated parallel transport along ``path``, oriented end -> start.

    Re-integrates the geodesic jointly with dM/ds = -Gamma(x) tau M at
    the path's own step count, then inverts M(T) so the result pulls
    vectors at the endpoint back to the start, matching the finite
    transport's orientation.
    """
    T = float(path.s[-1])
    steps = path.step_count
    _, _, M, n_valid = kernels.integrate(
        model, path.x[0], path.tau[0], T, steps, with_transport=True
    )
    if n_valid < steps + 1:
        raise DomainError("transport integration left the domain")
    return TransportMatrix(
        from_point=path.end_point.copy(),
        to_point=path.x[0].copy(),
        matrix=np.linalg.inv(M),
        kind="ode",
    )


def finite_transport(jet, t_disp, theta):
    """Group-law transport of ``theta`` (components at base + t_disp) to the
    jet's base point."""
    theta = np.asarray(theta, dtype=float)
    return jet.eval_lambda(t_disp) @ theta


def composition_defect(model, x, tau, s1, s2, *, order=6, steps=512):
    """Matrix defect of the two-leg transport composition.

    Returns (defect, context): defect = lam(x, x''-x) -
    lam(x, x'-x) lam(x', x''-x') with jets at the respective base points,
    where x' and x'' sit at affine parameters s1 and s1+s2 along the
    geodesic from x with velocity tau.
    """
    x = model.require_point(x)
    tau = np.asarray(tau, dtype=float)
    leg1 = shoot(model, x, tau, s1, steps=steps)
    xp = leg1.end_point
    leg2 = shoot(model, xp, leg1.end_tangent, s2, steps=steps)
    xpp = leg2.end_point
    jet_x = deformation_jet(model, x, order=order)
    jet_xp = deformation_jet(model, xp, order=order)
    lam_full = jet_x.eval_lambda(xpp - x)
    lam_1 = jet_x.eval_lambda(xp - x)
    lam_2 = jet_xp.eval_lambda(xpp - xp)
    defect = lam_full - lam_1 @ lam_2
    context = {
        "x_prime": xp,
        "x_second": xpp,
        "tau_second": leg2.end_tangent,
        "lam_full": lam_full,
        "lam_split": lam_1 @ lam_2,
    }
    return defect, context


def composition_residual(model, x, tau, s1, s2, *, order=6, steps=512):
    """Max-norm of the composition defect matrix."""
    defect, _ = composition_defect(model, x, tau, s1, s2, order=order, steps=steps)
    return float(np.max(np.abs(defect)))


def metric_compat_residual(model, jet, t_disp, *, steps=512, tau_prime=None):
    """Length-preservation residuals of the finite transport.

    full: max-norm of lam^T g(x) lam - g(x + t); radial: the same
    contraction evaluated only on the connecting geodesic's tangent at
    x + t.  ``tau_prime`` may be supplied to skip the two-point solve.
    """
    x = jet.base
    t = np.asarray(t_disp, dtype=float)
    xp = x + t
    g0, _ = metric_at(model, x)
    g1, _ = metric_at(model, xp)
    lam = jet.eval_lambda(t)
    full = float(np.max(np.abs(lam.T @ g0 @ lam - g1)))
    if tau_prime is None:
        tau0 = connect(model, x, xp, steps=steps)
        path = shoot(model, x, tau0, 1.0, steps=steps)
        tau_prime = path.end_tangent
    pulled = lam @ tau_prime
    radial = float(abs(pulled @ g0 @ pulled - tau_prime @ g1 @ tau_prime))
    return radial, full


def discrepancy_scaling(model, x, tau, theta, s_ladder, *, order=6, steps=512):
    """Finite-vs-integrated transport gap applied to ``theta`` over a ladder.

    For each s, both transports pull theta (read as components at the
    displaced point exp_x(s tau)) back to x; the table collects the
    max-norm differences and the exponent is the fitted log-log slope
    (inf when every entry sits at numerical zero, as in flat charts).
    """
    s_ladder = [float(s) for s in s_ladder]
    if len(s_ladder) < 3:
        raise SpecError("discrepancy ladder needs at least 3 points")
    x = model.require_point(x)
    tau = np.asarray(tau, dtype=float)
    theta = np.asarray(theta, dtype=float)
    jet = deformation_jet(model, x, order=order)
    table = []
    for s in sorted(s_ladder):
        t_disp, _, path = radial_probe(model, x, tau, s, steps=steps)
        lam = jet.eval_lambda(t_disp)
        ode = ode_transport(model, path)
        d = float(np.max(np.abs((lam - ode.matrix) @ theta)))
        table.append((s, d))
    exponent = fit_loglog_slope(
        [row[0] for row in table], [row[1] for row in table], floor=1e-12
    )
    return exponent, table
