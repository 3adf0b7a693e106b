"""Chart-local metric models and their differential structure.

A MetricModel bundles a chart: dimension, a metric evaluator (or a bare
connection), a validity predicate, and scale information used to size
normal neighborhoods.  The built-in catalog covers the standard test
geometries:

=============  =========================  =====================================
id             metric                     why it is in the catalog
=============  =========================  =====================================
flat(n)        identity                   everything exact, residuals must be 0
polar_flat     diag(1, r^2)               nonzero connection, zero curvature
sphere2(R)     R^2 diag(1, sin^2 t)       constant curvature +1/R^2
halfplane      diag(1/y^2, 1/y^2)         constant curvature -1
=============  =========================  =====================================

User metrics are supplied as expression strings (see ``expressions``)
and get exact symbolic metric derivatives; callable metrics fall back to
finite differences.  Connection coefficients are stored exactly
symmetrized in their lower pair, and derivative stacks of the
connection are produced by 4th-order central differences of the exact
connection evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expressions, fd
from .errors import (
    DomainError,
    MetricUnavailableError,
    NotPositiveDefiniteError,
    SingularMetricError,
    SpecError,
)

# kernel ids understood by the compiled integrator
KIND_FLAT = 0
KIND_POLAR_FLAT = 1
KIND_SPHERE2 = 2
KIND_HALFPLANE = 3

_DET_FLOOR = 1e-12
_SYM_TOL = 1e-12


@dataclass(frozen=True)
class VielbeinFrame:
    """Pointwise frame: columns of ``h`` are the frame vectors."""

    base: np.ndarray
    h: np.ndarray
    hinv: np.ndarray
    kind: str


@dataclass(frozen=True)
class ConnectionCoefficients:
    """Connection at a point plus optional derivative stack.

    ``gamma[m, s, n]`` holds the coefficient with upper index m and lower
    pair (s, n), symmetrized exactly.  ``derivs[j-1]`` is the j-th
    derivative tensor with the derivative axes appended last.
    """

    base: np.ndarray
    gamma: np.ndarray
    derivs: tuple


@dataclass(frozen=True)
class CurvatureTensor:
    """components[m, l, k, n]: upper index m, lower (l, k, n); antisymmetric in (k, n)."""

    base: np.ndarray
    components: np.ndarray


class MetricModel:
    """A chart-local manifold: metric and/or connection plus domain data."""

    def __init__(
        self,
        name,
        dimension,
        *,
        metric_fn=None,
        metric_deriv_fn=None,
        gamma_fn=None,
        gamma_batch_fn=None,
        inside_fn=None,
        boundary_distance_fn=None,
        curvature_scale_fn=None,
        kernel_kind=None,
        kernel_params=(),
        spec=None,
    ):
        if metric_fn is None and gamma_fn is None:
            raise SpecError("model needs a metric or a connection")
        self.name = name
        self.dimension = int(dimension)
        if self.dimension < 1:
            raise SpecError("dimension must be >= 1")
        self._metric_fn = metric_fn
        self._metric_deriv_fn = metric_deriv_fn
        self._gamma_fn = gamma_fn
        self._gamma_batch_fn = gamma_batch_fn
        self._inside_fn = inside_fn
        self._boundary_distance_fn = boundary_distance_fn
        self._curvature_scale_fn = curvature_scale_fn
        self.kernel_kind = kernel_kind
        self.kernel_params = np.asarray(kernel_params, dtype=float)
        self.spec = spec

    # -- points ------------------------------------------------------------

    def as_point(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            raise SpecError(
                f"expected {self.dimension} coordinates, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise DomainError(f"non-finite coordinates {x.tolist()}")
        return x

    def inside(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(x)):
            return False
        return bool(self._inside_fn(x)) if self._inside_fn is not None else True

    def require_point(self, x):
        x = self.as_point(x)
        if not self.inside(x):
            raise DomainError(f"point {x.tolist()} outside domain of {self.name}")
        return x

    def boundary_distance(self, x):
        if self._boundary_distance_fn is None:
            return math.inf
        return float(self._boundary_distance_fn(np.asarray(x, dtype=float)))

    def curvature_scale(self, x):
        if self._curvature_scale_fn is None:
            return math.inf
        return float(self._curvature_scale_fn(np.asarray(x, dtype=float)))

    def locality_radius(self, x):
        """Default normal-neighborhood radius: half the local scale."""
        return 0.5 * self.curvature_scale(x)

    # -- metric ------------------------------------------------------------

    @property
    def is_riemannian(self):
        return self._metric_fn is not None

    def metric(self, x):
        if self._metric_fn is None:
            raise MetricUnavailableError(
                f"model {self.name} supplies a connection only"
            )
        g = np.asarray(self._metric_fn(np.asarray(x, dtype=float)), dtype=float)
        if g.shape != (self.dimension, self.dimension):
            raise SpecError(f"metric evaluator returned shape {g.shape}")
        if np.max(np.abs(g - g.T)) > _SYM_TOL * max(1.0, np.max(np.abs(g))):
            raise SpecError(f"metric not symmetric at {np.asarray(x).tolist()}")
        return 0.5 * (g + g.T)

    def metric_derivs(self, x):
        """d g_{ab} / d x^c as array [a, b, c]; exact when the model provides it."""
        x = np.asarray(x, dtype=float)
        if self._metric_deriv_fn is not None:
            return np.asarray(self._metric_deriv_fn(x), dtype=float)
        stack = fd.derivative_stack(self.metric, x, 1, inside=self.inside)
        return stack[1]

    def gamma(self, x):
        """Connection coefficients [m, s, n], symmetrized exactly in (s, n)."""
        x = np.asarray(x, dtype=float)
        if self._gamma_fn is not None:
            raw = np.asarray(self._gamma_fn(x), dtype=float)
        else:
            g, ginv = metric_at(self, x)
            dg = self.metric_derivs(x)
            # 0.5 * g^{ms} (d_a g_{bs} + d_b g_{as} - d_s g_{ab});
            # dg[i, j, k] = d_k g_{ij}
            combo = dg.transpose(2, 0, 1) + dg.transpose(0, 2, 1) - dg
            raw = 0.5 * np.einsum("ms,abs->mab", ginv, combo)
        return 0.5 * (raw + raw.transpose(0, 2, 1))

    def gamma_batch(self, X):
        """Vectorized connection over a batch of points, shape (B, n, n, n)."""
        X = np.asarray(X, dtype=float)
        if self._gamma_batch_fn is not None:
            return self._gamma_batch_fn(X)
        return np.stack([self.gamma(x) for x in X])


def metric_at(model, x):
    """Metric and its inverse at ``x``; both exactly symmetric."""
    x = model.require_point(x)
    g = model.metric(x)
    det = np.linalg.det(g)
    if abs(det) <= _DET_FLOOR:
        raise SingularMetricError(
            f"metric determinant {det:.3e} at {x.tolist()} below threshold"
        )
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + ginv.T)
    return g, ginv


def christoffel(model, x, deriv_order=0, max_order=4):
    """Connection coefficients at ``x`` with derivatives up to ``deriv_order``.

    Derivative tensors come from 4th-order central differences of the
    (exact) connection evaluator, Richardson-refined from second order on;
    stencils honor the 5h domain margin.
    """
    x = model.require_point(x)
    if deriv_order < 0 or deriv_order > max_order:
        raise SpecError(
            f"deriv_order {deriv_order} outside configured range 0..{max_order}"
        )
    gamma = model.gamma(x)
    if deriv_order == 0:
        return ConnectionCoefficients(base=x, gamma=gamma, derivs=())
    stack = fd.derivative_stack(
        model.gamma, x, deriv_order, inside=model.inside
    )
    return ConnectionCoefficients(base=x, gamma=gamma, derivs=tuple(stack[1:]))


def riemann(model, x):
    """Curvature tensor R[m, l, k, n] assembled from the connection.

    Antisymmetry in (k, n) holds exactly by construction: both the
    derivative and the quadratic parts are differences of an array with
    its own (k, n) transpose.
    """
    cc = christoffel(model, x, deriv_order=1)
    gamma, dgamma = cc.gamma, cc.derivs[0]
    t1 = dgamma.transpose(0, 2, 3, 1)  # [m, l, k, n] = d_k Gamma^m_{n l}
    t3 = np.einsum("mks,snl->mlkn", gamma, gamma)
    R = (t1 - t1.swapaxes(2, 3)) + (t3 - t3.swapaxes(2, 3))
    return CurvatureTensor(base=cc.base, components=R)


def vielbein(model, x, kind="orthonormal"):
    """Frame at ``x``: identity for ``coordinate``; for ``orthonormal`` a
    lower-triangular factor of the inverse metric (h h^T = g^{-1}, hence
    h^T g h = I)."""
    x = model.require_point(x)
    n = model.dimension
    if kind == "coordinate":
        eye = np.eye(n)
        return VielbeinFrame(base=x, h=eye, hinv=eye.copy(), kind=kind)
    if kind != "orthonormal":
        raise SpecError(f"unknown vielbein kind {kind!r}")
    _, ginv = metric_at(model, x)
    try:
        h = np.linalg.cholesky(ginv)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"metric of {model.name} not positive definite at {x.tolist()}"
        ) from exc
    return VielbeinFrame(base=x, h=h, hinv=np.linalg.inv(h), kind=kind)


# -- catalog -----------------------------------------------------------------


def flat(n=2):
    n = int(n)
    eye = np.eye(n)
    zero_dg = np.zeros((n, n, n))
    zero_gamma = np.zeros((n, n, n))
    return MetricModel(
        f"flat{n}",
        n,
        metric_fn=lambda x: eye,
        metric_deriv_fn=lambda x: zero_dg,
        gamma_fn=lambda x: zero_gamma,
        gamma_batch_fn=lambda X: np.zeros((len(X), n, n, n)),
        kernel_kind=KIND_FLAT,
        spec={"catalog": "flat", "params": {"n": n}},
    )


def polar_flat():
    """Euclidean plane in polar coordinates (r, phi): curved chart, flat space."""

    def g(x):
        return np.diag([1.0, x[0] ** 2])

    def dg(x):
        out = np.zeros((2, 2, 2))
        out[1, 1, 0] = 2.0 * x[0]
        return out

    def gamma(x):
        r = x[0]
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -r
        out[1, 0, 1] = out[1, 1, 0] = 1.0 / r
        return out

    def gamma_batch(X):
        r = X[:, 0]
        out = np.zeros((len(X), 2, 2, 2))
        out[:, 0, 1, 1] = -r
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = 1.0 / r
        return out

    return MetricModel(
        "polar_flat",
        2,
        metric_fn=g,
        metric_deriv_fn=dg,
        gamma_fn=gamma,
        gamma_batch_fn=gamma_batch,
        inside_fn=lambda x: x[0] > 0.0,
        boundary_distance_fn=lambda x: x[0],
        curvature_scale_fn=lambda x: x[0],
        kernel_kind=KIND_POLAR_FLAT,
        spec={"catalog": "polar_flat", "params": {}},
    )


def sphere2(R=1.0):
    """Round 2-sphere of radius R in colatitude/longitude (theta, phi)."""
    R = float(R)
    if R <= 0:
        raise SpecError("sphere radius must be positive")
    R2 = R * R

    def g(x):
        return np.diag([R2, R2 * math.sin(x[0]) ** 2])

    def dg(x):
        out = np.zeros((2, 2, 2))
        out[1, 1, 0] = 2.0 * R2 * math.sin(x[0]) * math.cos(x[0])
        return out

    def gamma(x):
        theta = x[0]
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -math.sin(theta) * math.cos(theta)
        out[1, 0, 1] = out[1, 1, 0] = 1.0 / math.tan(theta)
        return out

    def gamma_batch(X):
        theta = X[:, 0]
        out = np.zeros((len(X), 2, 2, 2))
        out[:, 0, 1, 1] = -np.sin(theta) * np.cos(theta)
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = 1.0 / np.tan(theta)
        return out

    return MetricModel(
        "sphere2",
        2,
        metric_fn=g,
        metric_deriv_fn=dg,
        gamma_fn=gamma,
        gamma_batch_fn=gamma_batch,
        inside_fn=lambda x: 0.0 < x[0] < math.pi,
        boundary_distance_fn=lambda x: min(x[0], math.pi - x[0]),
        curvature_scale_fn=lambda x: R,
        kernel_kind=KIND_SPHERE2,
        kernel_params=(R,),
        spec={"catalog": "sphere2", "params": {"R": R}},
    )


def halfplane():
    """Hyperbolic upper half-plane (x, y), y > 0; sectional curvature -1."""

    def g(x):
        inv_y2 = 1.0 / (x[1] * x[1])
        return np.diag([inv_y2, inv_y2])

    def dg(x):
        out = np.zeros((2, 2, 2))
        d = -2.0 / x[1] ** 3
        out[0, 0, 1] = d
        out[1, 1, 1] = d
        return out

    def gamma(x):
        inv_y = 1.0 / x[1]
        out = np.zeros((2, 2, 2))
        out[0, 0, 1] = out[0, 1, 0] = -inv_y
        out[1, 0, 0] = inv_y
        out[1, 1, 1] = -inv_y
        return out

    def gamma_batch(X):
        inv_y = 1.0 / X[:, 1]
        out = np.zeros((len(X), 2, 2, 2))
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = -inv_y
        out[:, 1, 0, 0] = inv_y
        out[:, 1, 1, 1] = -inv_y
        return out

    return MetricModel(
        "halfplane",
        2,
        metric_fn=g,
        metric_deriv_fn=dg,
        gamma_fn=gamma,
        gamma_batch_fn=gamma_batch,
        inside_fn=lambda x: x[1] > 0.0,
        boundary_distance_fn=lambda x: x[1],
        curvature_scale_fn=lambda x: x[1],
        kernel_kind=KIND_HALFPLANE,
        spec={"catalog": "halfplane", "params": {}},
    )


_CATALOG = {
    "flat": lambda params: flat(params.get("n", 2)),
    "polar_flat": lambda params: polar_flat(),
    "sphere2": lambda params: sphere2(params.get("R", 1.0)),
    "halfplane": lambda params: halfplane(),
}

# CLI-style shorthands
_ALIASES = {
    "flat2": {"catalog": "flat", "params": {"n": 2}},
    "flat3": {"catalog": "flat", "params": {"n": 3}},
    "flat4": {"catalog": "flat", "params": {"n": 4}},
    "sphere2": {"catalog": "sphere2", "params": {}},
    "halfplane": {"catalog": "halfplane", "params": {}},
    "polar_flat": {"catalog": "polar_flat", "params": {}},
}


def expression_model(spec):
    """Model from expression strings: exact symbolic metric derivatives."""
    n = int(spec["dimension"])
    rows = spec["metric"]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise SpecError(f"metric must be a {n}x{n} array of expressions")
    comps = [
        [expressions.parse_expression(rows[i][j], n) for j in range(n)]
        for i in range(n)
    ]
    for i in range(n):
        for j in range(i + 1, n):
            if comps[i][j] != comps[j][i]:
                # Equal-but-differently-written entries are re-checked
                # numerically in MetricModel.metric; reject obvious cases here.
                lhs, rhs = rows[i][j], rows[j][i]
                if expressions.fold(comps[i][j]) != expressions.fold(comps[j][i]):
                    probe_failed = False
                    for probe in np.linspace(0.37, 1.13, 3):
                        xp = np.full(n, probe)
                        try:
                            a = expressions.evaluate(comps[i][j], xp)
                            b = expressions.evaluate(comps[j][i], xp)
                        except (ValueError, ZeroDivisionError, OverflowError):
                            continue
                        if not math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12):
                            probe_failed = True
                            break
                    if probe_failed:
                        raise SpecError(
                            f"user metric not symmetric: g[{i}][{j}]={lhs!r} "
                            f"vs g[{j}][{i}]={rhs!r}"
                        )
    diffs = [[[expressions.differentiate(comps[i][j], k) for k in range(n)]
              for j in range(n)] for i in range(n)]

    predicate = None
    if spec.get("domain"):
        predicate = expressions.parse_predicate(spec["domain"], n)

    def metric(x):
        out = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                out[i, j] = expressions.evaluate(comps[i][j], x)
        return out

    def metric_deriv(x):
        out = np.empty((n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[i, j, k] = expressions.evaluate(diffs[i][j][k], x)
        return out

    inside = None
    if predicate is not None:
        inside = lambda x: expressions.evaluate_predicate(predicate, x)

    # optional locality scale: a number or an expression in the coordinates
    scale_fn = None
    scale_spec = spec.get("scale")
    if scale_spec is not None:
        if isinstance(scale_spec, (int, float)):
            scale_fn = lambda x, v=float(scale_spec): v
        else:
            scale_ast = expressions.parse_expression(scale_spec, n)
            scale_fn = lambda x: expressions.evaluate(scale_ast, x)

    return MetricModel(
        spec.get("name", "user"),
        n,
        metric_fn=metric,
        metric_deriv_fn=metric_deriv,
        inside_fn=inside,
        curvature_scale_fn=scale_fn,
        spec=spec,
    )


def connection_model(dimension, gamma_fn, name="affine", **kwargs):
    """Affine model: connection supplied directly, no metric."""
    return MetricModel(name, dimension, gamma_fn=gamma_fn, **kwargs)


def load_manifold(spec):
    """Resolve a manifold spec: catalog dict, shorthand string, or user metric."""
    if isinstance(spec, MetricModel):
        return spec
    if isinstance(spec, str):
        if spec in _ALIASES:
            return load_manifold(_ALIASES[spec])
        raise SpecError(f"unknown manifold id {spec!r}")
    if not isinstance(spec, dict):
        raise SpecError(f"manifold spec must be a dict or id, got {type(spec)}")
    if "catalog" in spec:
        name = spec["catalog"]
        if name not in _CATALOG:
            raise SpecError(f"unknown catalog entry {name!r}")
        params = spec.get("params", {}) or {}
        return _CATALOG[name](params)
    if "metric" in spec:
        if "dimension" not in spec:
            raise SpecError("user metric spec needs a dimension")
        return expression_model(spec)
    raise SpecError("manifold spec needs 'catalog' or 'metric'")
