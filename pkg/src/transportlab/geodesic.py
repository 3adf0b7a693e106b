"""Geodesic initial-value and two-point problems.

``shoot`` integrates the geodesic system with a classical fixed-step
4th-order scheme (global error O((T/steps)^4)); ``connect`` solves the
two-point problem by single shooting with a damped Newton iteration on
the initial velocity, which is the chart logarithm map once the affine
parameter is normalized to s = 1 at the target.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    ConjugatePointError,
    ConvergenceError,
    DomainError,
    SpecError,
)

_MAX_NEWTON = 50
_COND_LIMIT = 1e14


@dataclass
class GeodesicPath:
    """Sampled affine-parameterized geodesic with tangents."""

    model: object
    s: np.ndarray
    x: np.ndarray
    tau: np.ndarray

    @property
    def step_count(self):
        return len(self.s) - 1

    @property
    def end_point(self):
        return self.x[-1]

    @property
    def end_tangent(self):
        return self.tau[-1]

    def index_at(self, s):
        """Nearest sample index for affine parameter ``s``."""
        total = self.s[-1]
        if not (min(0.0, total) - 1e-12 <= s <= max(0.0, total) + 1e-12):
            raise SpecError(f"s={s} outside path range [0, {total}]")
        return int(round(s / total * self.step_count))

    def sample_at(self, s):
        i = self.index_at(s)
        return self.x[i], self.tau[i]

    def to_csv(self, target):
        """Write (s, x components, tau components) rows; 17 significant digits."""
        n = self.x.shape[1]
        close = False
        if isinstance(target, (str, bytes)):
            fh = open(target, "w", encoding="utf-8")
            close = True
        else:
            fh = target
        try:
            header = (
                ["s"]
                + [f"x{j}" for j in range(n)]
                + [f"tau{j}" for j in range(n)]
            )
            fh.write(",".join(header) + "\n")
            for i in range(len(self.s)):
                row = [self.s[i], *self.x[i], *self.tau[i]]
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
        finally:
            if close:
                fh.close()

    def to_csv_string(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def shoot(model, x0, tau0, T, steps=512):
    """Geodesic from ``x0`` with initial velocity ``tau0`` over [0, T]."""
    x0 = model.require_point(x0)
    tau0 = np.asarray(tau0, dtype=float)
    if tau0.shape != x0.shape or not np.all(np.isfinite(tau0)):
        raise SpecError(f"bad initial velocity {tau0!r}")
    steps = int(steps)
    if steps < 8:
        raise SpecError("steps must be >= 8")
    xs, taus, _, n_valid = kernels.integrate(model, x0, tau0, T, steps)
    if n_valid < steps + 1:
        exit_s = (n_valid - 1) * (T / steps)
        raise DomainError(
            f"geodesic left the domain of {model.name} (or diverged) "
            f"near s = {exit_s:.6g}",
            exit_s=exit_s,
        )
    s = np.linspace(0.0, T, steps + 1)
    return GeodesicPath(model=model, s=s, x=xs, tau=taus)


def _endpoint_batch(model, x0, taus, steps):
    X0 = np.broadcast_to(x0, (len(taus), len(x0)))
    Xf, _, finite = kernels.integrate_batch(model, X0, taus, 1.0, steps)
    return Xf, finite


def connect(model, x, xp, *, steps=256, locality=None, tau0=None, tol=1e-10,
            max_iter=_MAX_NEWTON):
    """Initial velocity tau with exp_x(tau) = xp at affine parameter 1.

    Single shooting: damped Newton on the discrete endpoint map, Jacobian
    by central finite differences (one batched integration per
    iteration).  ``locality`` bounds the accepted chart separation and
    defaults to the model's normal-neighborhood radius; pass a larger
    value explicitly to reach farther targets.
    """
    x = model.require_point(x)
    xp = model.require_point(xp)
    if locality is None:
        locality = model.locality_radius(x)
    sep = float(np.linalg.norm(xp - x))
    if sep > locality:
        raise ConvergenceError(
            f"separation {sep:.4g} exceeds locality radius {locality:.4g}; "
            "pass locality= to override"
        )
    n = model.dimension
    tau = np.array(xp - x, dtype=float) if tau0 is None else np.array(tau0, dtype=float)

    best_tau = None
    best_norm = np.inf
    for _ in range(max_iter):
        delta = 1e-6 * max(1.0, float(np.max(np.abs(tau))))
        probes = np.empty((2 * n + 1, n))
        probes[0] = tau
        for j in range(n):
            probes[1 + 2 * j] = tau
            probes[1 + 2 * j, j] += delta
            probes[2 + 2 * j] = tau
            probes[2 + 2 * j, j] -= delta
        ends, finite = _endpoint_batch(model, x, probes, steps)
        if not finite[0]:
            raise ConvergenceError("endpoint map diverged during shooting")
        F = ends[0] - xp
        fnorm = float(np.max(np.abs(F)))
        if fnorm < best_norm:
            best_norm = fnorm
            best_tau = tau.copy()
        if fnorm < tol:
            return tau
        if not np.all(finite[1:]):
            raise ConvergenceError("finite-difference probe diverged during shooting")
        J = np.empty((n, n))
        for j in range(n):
            J[:, j] = (ends[1 + 2 * j] - ends[2 + 2 * j]) / (2.0 * delta)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > _COND_LIMIT:
            raise ConjugatePointError(
                f"endpoint Jacobian singular near {x.tolist()} "
                "(conjugate point suspected)"
            )
        step = np.linalg.solve(J, -F)
        # damping: halve until the residual actually decreases
        lam = 1.0
        while lam > 1.0 / 64.0:
            cand = tau + lam * step
            end_c, fin_c = _endpoint_batch(model, x, cand[None, :], steps)
            if fin_c[0] and float(np.max(np.abs(end_c[0] - xp))) < fnorm:
                tau = cand
                break
            lam *= 0.5
        else:
            raise ConvergenceError(
                "damped Newton stalled; target outside normal neighborhood"
            )
    if best_norm < 10.0 * tol and best_tau is not None:
        return best_tau
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations "
        f"(best residual {best_norm:.3e}); target outside normal neighborhood"
    )


def radial_probe(model, x, tau, s, steps=512):
    """Displacement and moving tangent of the geodesic exp_x(s*tau).

    Returns (t_disp, tau_prime, path): the chart displacement to the
    point at affine parameter s, the tangent there (of the original
    parameterization), and the integrated path.
    """
    path = shoot(model, x, tau, s, steps=steps)
    return path.end_point - np.asarray(x, dtype=float), path.end_tangent, path


def first_integral(model, path, s, jet=None, order=6):
    """Pullback of the moving tangent through the start-point jet.

    Evaluates lambda(x0, x(s) - x0) . tau(s); along an exact geodesic of
    a canonical structure this is constant in s and equals tau(0).
    """
    from . import jets  # local import to avoid a cycle

    if jet is None:
        jet = jets.deformation_jet(model, path.x[0], order=order)
    xs, taus = path.sample_at(s)
    lam = jet.eval_lambda(xs - path.x[0])
    return lam @ taus
