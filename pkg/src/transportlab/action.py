"""Energy of connecting geodesics and its gradient identities.

The two-point energy S(x, x') is half the integrated squared speed of
the connecting geodesic over the unit affine interval, computed by
composite Simpson quadrature on the integrator grid (the integrand is
constant up to integrator error, so the quadrature contributes nothing
beyond it).  The squared metric gradient of S in the second argument
reproduces the initial squared speed; the gradient itself matches the
metric image of the transported initial velocity.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SpecError
from .geodesic import connect, shoot
from .jets import deformation_jet
from .manifold import metric_at


def _simpson(values, h):
    # compensated sums: the finite-difference gradient of the result
    # divides by 1e-5, so plain accumulation noise would dominate it
    m = len(values) - 1
    if m % 2 != 0:
        raise SpecError("Simpson quadrature needs an even step count")
    acc = math.fsum(
        (values[0], values[-1], 4.0 * math.fsum(values[1:-1:2]),
         2.0 * math.fsum(values[2:-1:2]))
    )
    return acc * h / 3.0


def action_value(model, x, xp, *, steps=512, tau0=None, locality=None):
    """Energy of the geodesic from x to xp (affine interval [0, 1])."""
    if steps % 2 != 0:
        steps += 1
    tau = connect(model, x, xp, steps=steps, tau0=tau0, locality=locality)
    path = shoot(model, x, tau, 1.0, steps=steps)
    speeds = np.empty(steps + 1)
    for i in range(steps + 1):
        g = model.metric(path.x[i])
        speeds[i] = path.tau[i] @ g @ path.tau[i]
    return 0.5 * _simpson(speeds, 1.0 / steps)


def _grad_second(model, x, xp, *, steps, fd_step, locality=None):
    """Central-difference gradient of the energy in its second argument.

    Every stencil solve is warm-started from the center solution plus
    the chart offset (the zeroth-order displacement derivative of the
    solve), which keeps the Newton iterations short and, on flat charts,
    makes the seed exact.  Stencil targets sit a step beyond the center,
    so the locality bound gets the matching allowance.
    """
    n = model.dimension
    tau_c = connect(model, x, xp, steps=steps, locality=locality)
    if locality is None:
        sep = float(np.linalg.norm(np.asarray(xp, float) - np.asarray(x, float)))
        locality = max(model.locality_radius(x), sep) + 10.0 * fd_step
    grad = np.empty(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        s_plus = action_value(model, x, xp + e, steps=steps, tau0=tau_c + e,
                              locality=locality)
        s_minus = action_value(model, x, xp - e, steps=steps, tau0=tau_c - e,
                               locality=locality)
        grad[j] = (s_plus - s_minus) / (2.0 * fd_step)
    return grad, tau_c


def hj_residual(model, x, xp, *, steps=512, fd_step=1e-5, locality=None):
    """|g(x')^{ab} d_a S d_b S - g(x)(tau, tau)| with finite-difference
    gradients of the energy."""
    x = model.require_point(x)
    xp = model.require_point(xp)
    grad, tau_c = _grad_second(model, x, xp, steps=steps, fd_step=fd_step,
                               locality=locality)
    g0, _ = metric_at(model, x)
    _, ginv1 = metric_at(model, xp)
    return float(abs(grad @ ginv1 @ grad - tau_c @ g0 @ tau_c))


def gradient_relation_residual(model, x, xp, *, order=6, steps=512,
                               fd_step=1e-5, locality=None):
    """Gap between the energy gradient and the metric image of the
    transported initial velocity.

    The transport runs through the jet at x' evaluated at the
    back-displacement x - x'; the residual decays at least quadratically
    in the separation on curved models.
    """
    x = model.require_point(x)
    xp = model.require_point(xp)
    grad, tau_c = _grad_second(model, x, xp, steps=steps, fd_step=fd_step,
                               locality=locality)
    jet_xp = deformation_jet(model, xp, order=order)
    lam_back = jet_xp.eval_lambda(x - xp)
    g1, _ = metric_at(model, xp)
    predicted = g1 @ (lam_back @ tau_c)
    return float(np.max(np.abs(grad - predicted)))
