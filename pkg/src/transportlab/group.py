"""Pointwise realization of the deformed-group operations.

Group elements live only as parameter values at a base point together
with an evaluation rule for nearby points (constant frame components by
default, or a caller-supplied field rule); global parameter fields are
never materialized.  The displacement map K sends parameters to the
geodesic displacement they generate, the multiplication chains two
displacements through the series inverse H, and the auxiliary matrices
are directional derivatives of the multiplication at the identity,
estimated by Richardson-refined central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .geodesic import shoot
from .jets import DeformationJet, deformation_jet
from .manifold import VielbeinFrame, christoffel, vielbein
from .transport import TransportMatrix

_FD_STEP = 1e-5


@dataclass(frozen=True)
class GroupElementAt:
    """Parameter value at a base point, in the components of ``frame``.

    ``rule`` evaluates the parameter field at nearby points (frame
    components at the queried point); None means constant components.
    """

    base: np.ndarray
    t: np.ndarray
    frame: VielbeinFrame
    rule: object = None

    def value_at(self, model, y):
        y = np.asarray(y, dtype=float)
        if self.rule is None:
            return np.asarray(self.t, dtype=float)
        return np.asarray(self.rule(y), dtype=float)


def group_element(model, x, t, frame_kind="coordinate", rule=None):
    x = model.require_point(x)
    t = np.asarray(t, dtype=float)
    if t.shape != x.shape or not np.all(np.isfinite(t)):
        raise SpecError(f"bad group parameter {t!r}")
    return GroupElementAt(base=x, t=t, frame=vielbein(model, x, frame_kind), rule=rule)


def path_tangent_rule(path, scale=1.0):
    """Parameter rule ``scale * tangent field`` of a stored geodesic.

    Queries near the path get the tangent at the projected affine
    parameter, linearly interpolated between samples (coordinate-frame
    components).  This is the radial continuation the one-parameter
    product laws need.
    """

    def rule(y):
        y = np.asarray(y, dtype=float)
        i = int(np.argmin(np.linalg.norm(path.x - y, axis=1)))
        i = min(i, path.step_count - 1)
        seg = path.x[i + 1] - path.x[i]
        denom = float(seg @ seg)
        frac = float((y - path.x[i]) @ seg / denom) if denom > 0 else 0.0
        frac = min(max(frac, -1.0), 2.0)
        tau = path.tau[i] + frac * (path.tau[i + 1] - path.tau[i])
        return scale * tau

    return rule


def eval_K(model, x, t, *, steps=512):
    """Displacement generated by parameters ``t``: exp_x(h t) - x."""
    elem = t if isinstance(t, GroupElementAt) else group_element(model, x, t)
    x = model.require_point(x)
    tau0 = elem.frame.h @ elem.t
    path = shoot(model, x, tau0, 1.0, steps=steps)
    return path.end_point - x


def _resolve_rule(model, t_prime, x_prime, frame_kind):
    """Frame components of the second factor at the displaced point."""
    if isinstance(t_prime, GroupElementAt):
        return t_prime.value_at(model, x_prime)
    if callable(t_prime):
        return np.asarray(t_prime(x_prime), dtype=float)
    return np.asarray(t_prime, dtype=float)


def _chain(model, x_prime, frame_prime, K1, t_prime_val, jet, base_frame, steps):
    """Second-leg displacement plus series inverse of the total shift."""
    tau0 = frame_prime.h @ np.asarray(t_prime_val, dtype=float)
    K2 = shoot(model, x_prime, tau0, 1.0, steps=steps).end_point - x_prime
    H = jet.eval_H(K1 + K2)
    return base_frame.hinv @ H


def multiply(model, x, t, t_prime, *, jet=None, steps=512):
    """Group product: chain the two displacements, return to parameters.

    ``t`` is the first factor at ``x``; ``t_prime`` supplies the second
    factor at the displaced point (constant components, a callable rule,
    or a GroupElementAt carrying its own rule).  Returns the product
    element at ``x`` and the displaced point x' = x + K(x, t).
    """
    elem = t if isinstance(t, GroupElementAt) else group_element(model, x, t)
    x = model.require_point(x)
    K1 = eval_K(model, x, elem, steps=steps)
    x_prime = x + K1
    frame_prime = vielbein(model, x_prime, elem.frame.kind)
    t_prime_val = _resolve_rule(model, t_prime, x_prime, elem.frame.kind)
    if jet is None:
        jet = deformation_jet(model, x)
    t_second = _chain(model, x_prime, frame_prime, K1, t_prime_val, jet,
                      elem.frame, steps)
    return (
        GroupElementAt(base=x, t=t_second, frame=elem.frame, rule=None),
        x_prime,
    )


def aux_matrices(model, x, t, *, jet=None, step=_FD_STEP, richardson=True,
                 steps=512):
    """Directional derivatives of the multiplication at the identity.

    lam varies the second factor, mu the first (the first-factor probes
    displace the evaluation point of ``t``, so its field rule matters).
    Central differences with step ``step``; with ``richardson`` the
    half-step estimate removes the leading quadratic error.  The jet
    cross-check lives in the callers: the frame conversion of
    ``eval_lambda`` must reproduce lam to finite-difference accuracy.
    """
    elem = t if isinstance(t, GroupElementAt) else group_element(model, x, t)
    x = model.require_point(x)
    n = model.dimension
    if jet is None:
        jet = deformation_jet(model, x)
    K1 = eval_K(model, x, elem, steps=steps)
    x_prime = x + K1
    frame_prime = vielbein(model, x_prime, elem.frame.kind)

    def phi_lambda(probe):
        # first factor fixed: reuse its displacement and frame
        return _chain(model, x_prime, frame_prime, K1, probe, jet, elem.frame, steps)

    def phi_mu(probe_vec):
        first = GroupElementAt(base=x, t=probe_vec, frame=elem.frame, rule=None)
        product, _ = multiply(model, x, first, elem, jet=jet, steps=steps)
        return product.t

    def central(fun, h):
        out = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out[:, j] = (fun(e) - fun(-e)) / (2.0 * h)
        return out

    def estimate(fun):
        coarse = central(fun, step)
        if not richardson:
            return coarse
        fine = central(fun, 0.5 * step)
        return (4.0 * fine - coarse) / 3.0

    lam = estimate(phi_lambda)
    mu = estimate(phi_mu)
    return (
        TransportMatrix(from_point=x_prime, to_point=x, matrix=lam, kind="lambda_fd"),
        TransportMatrix(from_point=x, to_point=x, matrix=mu, kind="mu_fd"),
    )


def frame_lambda_from_jet(model, jet, t_disp, frame_kind="coordinate"):
    """Jet transport matrix converted to frame components.

    Conversion: inverse frame at the base, jet derivative at the
    displacement, frame at the displaced point.
    """
    x = jet.base
    lam_coord = jet.eval_lambda(t_disp)
    f0 = vielbein(model, x, frame_kind)
    f1 = vielbein(model, x + np.asarray(t_disp, float), frame_kind)
    return f0.hinv @ lam_coord @ f1.h


def gamma_coefficients(model, x, frame="coordinate"):
    """Frame-basis connection coefficients gamma[m, k, n].

    Closing relation: conjugate the coordinate connection by the frame
    field and add the frame's own transport term (finite differences of
    the frame field when no closed form is available).
    """
    from .fd import partial

    x = model.require_point(x)
    kind = frame.kind if isinstance(frame, VielbeinFrame) else frame
    n = model.dimension
    f = vielbein(model, x, kind)
    gamma = christoffel(model, x).gamma

    def h_field(y):
        return vielbein(model, y, kind).h

    dh = np.empty((n, n, n))  # dh[mu, m, kappa] = d_kappa h^mu_m
    for kappa in range(n):
        counts = [0] * n
        counts[kappa] = 1
        dh[:, :, kappa] = partial(h_field, x, counts, inside=model.inside)
    term = np.einsum("mkv,ka,vb->mab", gamma, f.h, f.h) + np.einsum(
        "ka,mbk->mab", f.h, dh
    )
    return np.einsum("sm,mab->sab", f.hinv, term)


def canonical_law_residuals(model, x, tau, s1, s2, *, order=6, steps=512):
    """Residuals of the one-parameter multiplication law along a geodesic.

    r28: parameters of the chained product against (s1+s2) tau.
    r29: pullback of the moving tangent through the group lam.
    r30: the left-factor analogue under both readings of its closing
    term (the literal 's2 tau' and the derivative 's2 dtau/ds'); both
    values are reported, neither is asserted.
    """
    x = model.require_point(x)
    tau = np.asarray(tau, dtype=float)
    leg1 = shoot(model, x, tau, s1, steps=steps)
    xp = leg1.end_point
    tau_p = leg1.end_tangent

    frame0 = vielbein(model, x, "coordinate")
    jet = deformation_jet(model, x, order=order)
    tau_frame = frame0.hinv @ tau

    def radial_rule(y):
        return s2 * (vielbein(model, y, "coordinate").hinv @ tau_p)

    first = GroupElementAt(base=x, t=s1 * tau_frame, frame=frame0, rule=None)
    product, _ = multiply(model, x, first, radial_rule, jet=jet, steps=steps)
    r28 = float(np.max(np.abs(product.t - (s1 + s2) * tau_frame)))

    lam, _ = aux_matrices(model, x, first, jet=jet, steps=steps)
    tau_p_frame = vielbein(model, xp, "coordinate").hinv @ tau_p
    r29 = float(np.max(np.abs(tau_frame - lam.matrix @ tau_p_frame)))

    second = GroupElementAt(base=x, t=s2 * tau_frame, frame=frame0, rule=None)
    _, mu = aux_matrices(model, x, second, jet=jet, steps=steps)
    tau_dot = -np.einsum("msl,s,l->m", christoffel(model, x).gamma, tau, tau)
    r30_literal = float(np.max(np.abs(tau_frame - mu.matrix @ tau_frame - s2 * tau_frame)))
    r30_dot = float(
        np.max(np.abs(tau_frame - mu.matrix @ tau_frame - s2 * (frame0.hinv @ tau_dot)))
    )
    return {"r28": r28, "r29": r29, "r30_literal": r30_literal, "r30_dot": r30_dot}


def reframe_jet(jet, L):
    """Jet of the component-rotated map: left-multiply by L at the base.

    ``L`` may be a constant matrix or a matrix field evaluated at the
    jet's base point.  Transport and residual evaluations pull the
    rotation back out, so canonicity is unaffected.
    """
    L0 = np.asarray(L(jet.base) if callable(L) else L, dtype=float)
    n = jet.dimension
    if L0.shape != (n, n):
        raise SpecError(f"reframe matrix has shape {L0.shape}, expected {(n, n)}")
    if abs(np.linalg.det(L0)) < 1e-12:
        raise SpecError("reframe matrix is singular")
    packed = {}
    for m in range(jet.order + 1):
        idxs, values = jet._packed[m]
        packed[m] = (idxs, L0 @ values)
    carried = L0 if jet.frame_transform is None else L0 @ jet.frame_transform
    return DeformationJet(
        jet.base, jet.order, packed, jet.trust_radius, frame_transform=carried
    )
