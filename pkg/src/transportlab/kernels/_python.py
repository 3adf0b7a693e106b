"""Pure-Python integrator kernels (reference backend).

Classical fixed-step 4th-order integration of the geodesic system

    dx/ds  = tau
    dtau/ds = -A(x, tau) tau        with A^m_l = Gamma^m_{s l} tau^s

optionally coupled with the linear transport system dM/ds = -A M,
M(0) = I.  The compiled backend reproduces these loops step for step;
agreement between the two is part of the test suite.
"""

from __future__ import annotations

import numpy as np


def _connection_action(model, x, tau):
    gamma = model.gamma(x)
    return gamma @ tau if gamma.ndim == 2 else np.einsum("msl,s->ml", gamma, tau)


def integrate(model, x0, tau0, T, steps, with_transport=False):
    """Integrate one geodesic; returns (xs, taus, M_final, n_valid).

    ``n_valid`` counts the samples that stayed finite and inside the
    domain; it equals steps + 1 on full success.  ``M_final`` is the
    accumulated forward transport matrix (None unless requested).
    """
    n = model.dimension
    h = T / steps
    xs = np.empty((steps + 1, n))
    taus = np.empty((steps + 1, n))
    base = np.array(x0, dtype=float)
    # integrate the displacement from the base point: accumulating tiny
    # increments onto O(1) coordinates would otherwise collect rounding
    # noise that the finite-difference probes of the group law amplify
    disp = np.zeros(n)
    tau = np.array(tau0, dtype=float)
    M = np.eye(n) if with_transport else None
    xs[0] = base
    taus[0] = tau
    if not model.inside(base):
        return xs, taus, M, 0

    def rhs(disp, tau, M):
        A = np.einsum("msl,s->ml", model.gamma(base + disp), tau)
        dtau = -A @ tau
        dM = -A @ M if M is not None else None
        return tau, dtau, dM

    for i in range(steps):
        k1x, k1t, k1m = rhs(disp, tau, M)
        k2x, k2t, k2m = rhs(
            disp + 0.5 * h * k1x,
            tau + 0.5 * h * k1t,
            None if M is None else M + 0.5 * h * k1m,
        )
        k3x, k3t, k3m = rhs(
            disp + 0.5 * h * k2x,
            tau + 0.5 * h * k2t,
            None if M is None else M + 0.5 * h * k2m,
        )
        k4x, k4t, k4m = rhs(
            disp + h * k3x, tau + h * k3t, None if M is None else M + h * k3m
        )
        disp = disp + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        tau = tau + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        if M is not None:
            M = M + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        x = base + disp
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(tau))):
            return xs, taus, M, i + 1
        xs[i + 1] = x
        taus[i + 1] = tau
        if not model.inside(x):
            return xs, taus, M, i + 1
    return xs, taus, M, steps + 1


def integrate_batch(model, X0, Tau0, T, steps):
    """Vectorized endpoint integration of a batch of geodesics.

    Returns (X_final, Tau_final, finite_mask).  Domain membership of the
    final points is the caller's business; intermediate states are only
    guarded for finiteness (the batch path serves sampling oracles that
    stay well inside the chart).
    """
    Base = np.array(X0, dtype=float)
    Disp = np.zeros_like(Base)
    Tau = np.array(Tau0, dtype=float)
    h = T / steps

    def rhs(Disp, Tau):
        A = np.einsum("bmsl,bs->bml", model.gamma_batch(Base + Disp), Tau)
        return Tau, -np.einsum("bml,bl->bm", A, Tau)

    for _ in range(steps):
        k1x, k1t = rhs(Disp, Tau)
        k2x, k2t = rhs(Disp + 0.5 * h * k1x, Tau + 0.5 * h * k1t)
        k3x, k3t = rhs(Disp + 0.5 * h * k2x, Tau + 0.5 * h * k2t)
        k4x, k4t = rhs(Disp + h * k3x, Tau + h * k3t)
        Disp = Disp + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        Tau = Tau + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    X = Base + Disp
    finite = np.all(np.isfinite(X), axis=1) & np.all(np.isfinite(Tau), axis=1)
    return X, Tau, finite
