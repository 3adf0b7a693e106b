"""Residual verification suite and machine-readable reports.

Every check produces records with a stable id, the computed residuals,
the tolerance it is held to, and a status: assert-pass / assert-fail
for contracts, or measured for quantities that are reported but never
hard-asserted (the full-matrix identities on curved models, where only
the decay exponent is a contract).  Reports serialize deterministically:
insertion-ordered fields, floats at 17 significant digits, records
sorted by (check, model, inputs).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fd, kernels
from .action import action_value, gradient_relation_residual, hj_residual
from .errors import SpecError, TransportLabError
from .geodesic import connect, first_integral, radial_probe, shoot
from .group import (
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
    canonicity_residual,
    deformation_jet,
    jet_from_log_samples,
    rho_coefficients,
)
from .manifold import christoffel, load_manifold, metric_at, riemann, vielbein
from .transport import (
    composition_defect,
    discrepancy_scaling,
    finite_transport,
    metric_compat_residual,
    ode_transport,
)

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema": SCHEMA_VERSION,
    "backend": "auto",
    "models": ["flat2", "flat3", "polar_flat", "sphere2", "halfplane"],
    "steps": 1000,
    "connect_steps": 512,
    "jet_order": 6,
    # radial contracts are jet-truncation limited at the trust boundary;
    # the checks holding 1e-6 there use the deepest supported series
    "radial_jet_order": 8,
    "oracle_order": 4,
    "workers": 1,
    "tol_scale": 1.0,
    "ladder": [0.25, 0.4, 0.6, 1.0],
    # shrinking ladder for exponent fits: small enough that the leading
    # order dominates, large enough to stay above the noise floors
    "scaling_ladder": [0.1, 0.15, 0.25, 0.4],
    "rho_step": 1e-3,
}

# base points per catalog model (3 each, used round-robin by the checks)
_POINTS = {
    "flat2": [[0.3, -0.2], [1.0, 2.0], [-0.5, 0.8]],
    "flat3": [[0.1, 0.2, -0.3], [0.5, -0.2, 0.1], [1.0, 0.5, 0.2]],
    "flat4": [[0.1, 0.2, -0.3, 0.4], [0.5, -0.2, 0.1, 0.0], [1.0, 0.5, 0.2, -0.1]],
    "polar_flat": [[1.0, 0.5], [1.5, -0.4], [0.8, 1.2]],
    "sphere2": [[math.pi / 2 - 0.3, 0.4], [math.pi / 2, 0.0], [1.9, -0.3]],
    "halfplane": [[0.0, 1.0], [0.5, 1.5], [-0.3, 0.8]],
}

_FLAT_SCALE = 1.0  # stand-in direction scale where the curvature scale is infinite


@dataclass
class CheckRecord:
    check: str
    anchor: str
    model: str
    point: list | None
    inputs: dict
    residuals: dict
    tolerance: float | None
    status: str
    exponent: float | None = None

    def sort_key(self):
        return (self.check, self.model, repr(sorted(self.inputs.items())))


@dataclass
class SuiteResult:
    records: list
    tables: dict = field(default_factory=dict)

    @property
    def failed(self):
        return [r for r in self.records if r.status == "assert-fail"]


class _Ctx:
    """Per-model verification context with jet caching."""

    def __init__(self, name, cfg):
        self.name = name
        self.cfg = cfg
        self.model = load_manifold(name)
        self._jets = {}
        self.tables = {}

    @property
    def riemannian(self):
        return self.model.is_riemannian

    @property
    def flat_like(self):
        return self.name.startswith("flat") or self.name == "polar_flat"

    def points(self):
        pts = _POINTS.get(self.name)
        if pts is None:
            raise SpecError(f"no verification geometry for model {self.name}")
        return [np.asarray(p, dtype=float) for p in pts]

    def scale(self, x):
        s = self.model.curvature_scale(x)
        return _FLAT_SCALE if not np.isfinite(s) else s

    def tau(self, x, magnitude=0.2):
        n = self.model.dimension
        direction = np.array([0.6, 0.8, 0.3, -0.4][:n])
        direction /= np.linalg.norm(direction)
        return magnitude * self.scale(x) * direction

    def tau_boundary(self, x):
        """Velocity probing the strongest radial regime the series
        supports: affine length at half the locality radius, shrunk so
        the chart displacement stays at 70% of the jet trust radius.
        (At the trust boundary itself the depth-8 truncation of the
        slowest-converging catalog series is a few 1e-6 and would
        dominate the radial tolerances; the approach to the boundary is
        covered by the decay-law checks instead.)"""
        direction = self.tau(x, magnitude=1.0)
        if self.riemannian:
            g = self.model.metric(np.asarray(x, float))
            direction = direction / math.sqrt(direction @ g @ direction)
        else:
            direction = direction / np.linalg.norm(direction)
        tau = 0.25 * self.scale(x) * direction
        trust = 0.25 * self.scale(x)
        end = shoot(self.model, x, tau, 1.0,
                    steps=self.cfg["connect_steps"]).end_point
        reach = float(np.linalg.norm(end - np.asarray(x, float)))
        if reach > 0.7 * trust:
            tau = tau * (0.7 * trust / reach)
        return tau

    def theta(self, x, magnitude=0.2):
        n = self.model.dimension
        direction = np.array([-0.8, 0.6, 0.5, 0.2][:n])
        direction /= np.linalg.norm(direction)
        return magnitude * self.scale(x) * direction

    def jet(self, x, order=None):
        order = order or self.cfg["jet_order"]
        key = (tuple(np.asarray(x, float)), order)
        if key not in self._jets:
            self._jets[key] = deformation_jet(self.model, x, order=order)
        return self._jets[key]


def _record(ctx, check, anchor, point, inputs, residuals, tol, *,
            measured=False, exponent=None, ok=None):
    status = "measured"
    if not measured:
        if ok is None:
            ok = all(v <= tol for v in residuals.values())
        status = "assert-pass" if ok else "assert-fail"
    return CheckRecord(
        check=check,
        anchor=anchor,
        model=ctx.name,
        point=None if point is None else [float(v) for v in np.asarray(point)],
        inputs=inputs,
        residuals={k: float(v) for k, v in residuals.items()},
        tolerance=None if tol is None else float(tol),
        status=status,
        exponent=None if exponent is None else float(exponent),
    )


# --- geometry ---------------------------------------------------------------


def check_metric_structure(ctx, out):
    tol = 1e-12 * ctx.cfg["tol_scale"]
    for x in ctx.points():
        g, ginv = metric_at(ctx.model, x)
        res = {
            "symmetry": np.max(np.abs(g - g.T)),
            "inverse": np.max(np.abs(ginv @ g - np.eye(ctx.model.dimension))),
        }
        out.append(_record(ctx, "metric.structure", "metric-inverse", x, {},
                           res, tol))


def check_connection(ctx, out):
    for x in ctx.points():
        gamma = christoffel(ctx.model, x).gamma
        res = {"torsion": np.max(np.abs(gamma - gamma.transpose(0, 2, 1)))}
        out.append(_record(ctx, "connection.torsion_free", "symmetric-lower-pair",
                           x, {}, res, 0.0, ok=res["torsion"] == 0.0))
        if ctx.riemannian:
            # metric compatibility with an independent FD of the metric
            dg = fd.derivative_stack(ctx.model.metric, x, 1,
                                     inside=ctx.model.inside)[1]
            g, _ = metric_at(ctx.model, x)
            nabla = dg - np.einsum("sam,sn->mna", gamma, g) \
                - np.einsum("san,ms->mna", gamma, g)
            res = {"nabla_g": np.max(np.abs(nabla))}
            out.append(_record(ctx, "connection.metric_compat",
                               "covariant-constancy-of-metric", x, {},
                               res, 1e-6 * ctx.cfg["tol_scale"]))


def check_curvature(ctx, out):
    tol_scale = ctx.cfg["tol_scale"]
    for x in ctx.points():
        R = riemann(ctx.model, x).components
        anti = np.max(np.abs(R + R.swapaxes(2, 3)))
        cyc = np.max(np.abs(R + np.moveaxis(R, (1, 2, 3), (2, 3, 1))
                            + np.moveaxis(R, (1, 2, 3), (3, 1, 2))))
        out.append(_record(ctx, "curvature.identities", "antisymmetry-and-cyclic",
                           x, {}, {"antisymmetry": anti, "cyclic": cyc},
                           1e-8 * tol_scale))
    x = ctx.points()[0]
    R = riemann(ctx.model, x).components
    if ctx.name == "sphere2":
        xeq = np.array([math.pi / 2, 0.0])
        val = riemann(ctx.model, xeq).components[0, 1, 0, 1]
        res = {"sphere_component": abs(val - 1.0)}
        out.append(_record(ctx, "curvature.values", "constant-positive-curvature",
                           xeq, {"component": "R[0,1,0,1]"}, res, 1e-6 * tol_scale))
    elif ctx.name == "halfplane":
        g, _ = metric_at(ctx.model, x)
        num = float(np.einsum("s,slkn->lkn", g[0], R)[1, 0, 1])
        den = g[0, 0] * g[1, 1] - g[0, 1] ** 2
        res = {"sectional": abs(num / den + 1.0)}
        out.append(_record(ctx, "curvature.values", "constant-negative-curvature",
                           x, {}, res, 1e-6 * tol_scale))
    else:
        res = {"max_component": np.max(np.abs(R))}
        out.append(_record(ctx, "curvature.values", "flat-chart", x, {},
                           res, 1e-8 * tol_scale))


def check_vielbein(ctx, out):
    if not ctx.riemannian:
        return
    tol = 1e-12 * ctx.cfg["tol_scale"]
    for x in ctx.points():
        f = vielbein(ctx.model, x, "orthonormal")
        g, _ = metric_at(ctx.model, x)
        res = {
            "orthonormality": np.max(np.abs(f.h.T @ g @ f.h - np.eye(len(g)))),
            "inverse": np.max(np.abs(f.h @ f.hinv - np.eye(len(g)))),
        }
        out.append(_record(ctx, "frame.orthonormal", "frame-factorization", x,
                           {}, res, tol))


# --- geodesics ---------------------------------------------------------------


def check_speed_conservation(ctx, out):
    if not ctx.riemannian:
        return
    steps = ctx.cfg["steps"]
    for x in ctx.points():
        # no series involved here, so a long geodesic is fine; it keeps
        # the check sensitive to deliberate under-resolution
        tau = ctx.tau(x, magnitude=0.8)
        path = shoot(ctx.model, x, tau, 1.0, steps=steps)
        speeds = [path.tau[i] @ ctx.model.metric(path.x[i]) @ path.tau[i]
                  for i in range(0, steps + 1, max(1, steps // 50))]
        res = {"speed_drift": max(speeds) - min(speeds)}
        out.append(_record(ctx, "geodesic.speed_conservation", "constant-speed",
                           x, {"steps": steps}, res, 1e-9 * ctx.cfg["tol_scale"]))


def check_convergence_order(ctx, out):
    if ctx.name != "halfplane":
        return
    x = np.array([0.0, 1.0])
    tau = np.array([0.0, 1.0])
    ladders = [16, 32, 64, 128]
    errs = []
    for steps in ladders:
        end = shoot(ctx.model, x, tau, 1.0, steps=steps).end_point
        errs.append(abs(end[1] - math.e) + abs(end[0]))
    slope = -fd.fit_loglog_slope(ladders, errs)
    res = {"slope_deviation": abs(slope - 4.0)}
    out.append(_record(ctx, "geodesic.convergence_order", "fourth-order-integrator",
                       x, {"ladder": ladders}, res, 0.1,
                       exponent=slope))


def check_connect_roundtrip(ctx, out):
    steps = ctx.cfg["connect_steps"]
    for x in ctx.points():
        tau = ctx.tau(x)
        end = shoot(ctx.model, x, tau, 1.0, steps=steps).end_point
        back = connect(ctx.model, x, end, steps=steps)
        res = {"roundtrip": np.max(np.abs(back - tau))}
        out.append(_record(ctx, "geodesic.connect_roundtrip", "log-exp-inverse",
                           x, {}, res, 1e-8 * ctx.cfg["tol_scale"]))


def check_first_integral(ctx, out):
    steps = ctx.cfg["steps"]
    for x in ctx.points():
        tau = ctx.tau_boundary(x)
        path = shoot(ctx.model, x, tau, 1.0, steps=steps)
        jet = ctx.jet(x, order=ctx.cfg["radial_jet_order"])
        drift = 0.0
        for s in np.linspace(0.1, 1.0, 10):
            u = first_integral(ctx.model, path, s, jet=jet)
            drift = max(drift, float(np.max(np.abs(u - tau))))
        res = {"max_drift": drift}
        out.append(_record(ctx, "geodesic.first_integral", "pullback-constancy",
                           x, {"steps": steps}, res, 1e-6 * ctx.cfg["tol_scale"]))


# --- jets --------------------------------------------------------------------


def check_jet_boundary(ctx, out):
    for x in ctx.points():
        jet = ctx.jet(x)
        gamma = christoffel(ctx.model, x).gamma
        res = {
            "zeroth": np.max(np.abs(jet.full(0))),
            "first": np.max(np.abs(jet.full(1) - np.eye(ctx.model.dimension))),
            "second_vs_connection": np.max(np.abs(jet.full(2) - gamma)),
        }
        out.append(_record(ctx, "jet.boundary", "identity-jet-at-zero", x, {},
                           res, 1e-12 * ctx.cfg["tol_scale"]))


def check_jet_oracle(ctx, out):
    order = ctx.cfg["oracle_order"]
    for x in ctx.points():
        rec = deformation_jet(ctx.model, x, order=order)
        orc = jet_from_log_samples(ctx.model, x, order)
        worst = max(
            float(np.max(np.abs(rec.full(m) - orc.full(m))))
            for m in range(order + 1)
        )
        res = {"max_coefficient_gap": worst}
        out.append(_record(ctx, "jet.oracle_agreement", "recurrence-vs-sampling",
                           x, {"order": order}, res, 1e-5 * ctx.cfg["tol_scale"]))


def check_jet_scaling(ctx, out):
    x = ctx.points()[0]
    tau = ctx.tau(x)
    jet = ctx.jet(x)
    order = jet.order
    steps = ctx.cfg["connect_steps"]
    ladder = ctx.cfg["ladder"] if ctx.name.startswith("flat") \
        else ctx.cfg["scaling_ladder"]
    radial, canon, sizes = [], [], []
    for s in ladder:
        t_disp, tau_p, _ = radial_probe(ctx.model, x, tau, s, steps=steps)
        sizes.append(float(np.linalg.norm(t_disp)))
        radial.append(float(np.max(np.abs(jet.eval_H(t_disp) - s * tau))))
        canon.append(canonicity_residual(jet, ctx.model, t_disp, tau_p))
    if ctx.name.startswith("flat"):
        res = {"radial_max": max(radial), "canonicity_max": max(canon)}
        out.append(_record(ctx, "jet.flat_exactness", "identity-series", x, {},
                           res, 1e-10 * ctx.cfg["tol_scale"]))
        return
    exp_radial = fd.fit_loglog_slope(sizes, radial)
    exp_canon = fd.fit_loglog_slope(sizes, canon)
    # a residual pinned at the coefficient-noise floor has no exponent
    radial_ok = exp_radial >= order + 1 - 0.5 or max(radial) <= 1e-10
    ok = radial_ok and exp_canon >= order - 1 - 0.5
    out.append(_record(ctx, "jet.truncation_scaling", "radial-and-defining-residuals",
                       x, {"ladder": list(ladder), "order": order},
                       {"radial_at_max": radial[-1], "canonicity_at_max": canon[-1],
                        "radial_exponent": exp_radial,
                        "canonicity_exponent": exp_canon},
                       None, ok=ok, exponent=exp_canon))
    out_rows = [("radial", s, r) for s, r in zip(sizes, radial)]
    out_rows += [("canonicity", s, r) for s, r in zip(sizes, canon)]
    ctx.tables[f"jet_scaling_{ctx.name}"] = out_rows


def check_jet_order_consistency(ctx, out):
    if ctx.name.startswith("flat"):
        return
    x = ctx.points()[0]
    tau = ctx.tau(x)
    steps = ctx.cfg["connect_steps"]
    t_disp, tau_p, _ = radial_probe(ctx.model, x, tau, 0.6, steps=steps)
    floor = 1e-11
    prev = None
    ok = True
    values = {}
    for order in (4, 6):
        jet = ctx.jet(x, order=order)
        r = canonicity_residual(jet, ctx.model, t_disp, tau_p)
        values[f"order_{order}"] = r
        if prev is not None and r > prev + floor:
            ok = prev < floor  # both at noise floor is acceptable
        prev = r
    out.append(_record(ctx, "jet.order_consistency", "higher-order-not-worse",
                       x, {}, values, None, ok=ok))


def check_rho_identities(ctx, out):
    tol_scale = ctx.cfg["tol_scale"]
    for x in ctx.points():
        rho, R_check = rho_coefficients(ctx.model, x)
        R = riemann(ctx.model, x).components
        sym = (rho + rho.transpose(0, 2, 3, 1) + rho.transpose(0, 3, 1, 2)
               + rho.transpose(0, 2, 1, 3) + rho.transpose(0, 1, 3, 2)
               + rho.transpose(0, 3, 2, 1)) / 6.0
        res = {
            "skew_reproduces_curvature": np.max(np.abs(R_check.components - R)),
            "fully_symmetric_part": np.max(np.abs(sym)),
        }
        ok = (res["skew_reproduces_curvature"] <= 1e-6 * tol_scale
              and res["fully_symmetric_part"] <= 1e-10 * tol_scale)
        out.append(_record(ctx, "jet.rho_identities", "third-jet-curvature-split",
                           x, {}, res, 1e-6 * tol_scale, ok=ok))


def check_exp_log_roundtrip(ctx, out):
    order = ctx.cfg["jet_order"]
    for x in ctx.points():
        jet = ctx.jet(x, order=order)
        trust = jet.trust_radius if np.isfinite(jet.trust_radius) else 1.0
        n = ctx.model.dimension
        direction = np.array([0.6, 0.8, 0.3, -0.4][:n])
        direction /= np.linalg.norm(direction)
        t_param = trust * direction
        K = eval_K(ctx.model, x, group_element(ctx.model, x, t_param),
                   steps=ctx.cfg["connect_steps"])
        res = {"roundtrip": np.max(np.abs(jet.eval_H(K, check_trust=False) - t_param))}
        out.append(_record(ctx, "jet.exp_log_roundtrip", "series-inverts-exponential",
                           x, {"order": order}, res, 1e-4 * ctx.cfg["tol_scale"]))


# --- transport ---------------------------------------------------------------


def check_radial_transport(ctx, out):
    steps = ctx.cfg["steps"]
    for x in ctx.points():
        tau = ctx.tau_boundary(x)
        t_disp, tau_p, path = radial_probe(ctx.model, x, tau, 1.0, steps=steps)
        jet = ctx.jet(x, order=ctx.cfg["radial_jet_order"])
        fin = finite_transport(jet, t_disp, tau_p)
        ode = ode_transport(ctx.model, path).matrix @ tau_p
        res = {
            "finite_vs_initial": np.max(np.abs(fin - tau)),
            "finite_vs_ode": np.max(np.abs(fin - ode)),
        }
        out.append(_record(ctx, "transport.radial_equivalence",
                           "tangent-pullback-match", x, {}, res,
                           1e-6 * ctx.cfg["tol_scale"]))


def check_ode_metric_compat(ctx, out):
    if not ctx.riemannian:
        return
    steps = ctx.cfg["steps"]
    for x in ctx.points():
        tau = ctx.tau(x)
        path = shoot(ctx.model, x, tau, 1.0, steps=steps)
        M = ode_transport(ctx.model, path).matrix
        g0, _ = metric_at(ctx.model, x)
        g1, _ = metric_at(ctx.model, path.end_point)
        res = {"gram_drift": np.max(np.abs(M.T @ g0 @ M - g1))}
        out.append(_record(ctx, "transport.ode_metric_compat",
                           "length-preservation", x, {}, res,
                           1e-8 * ctx.cfg["tol_scale"]))


def check_transport_discrepancy(ctx, out):
    x = ctx.points()[0]
    tau = ctx.tau(x, magnitude=0.15)
    theta = ctx.theta(x)
    steps = ctx.cfg["connect_steps"]
    ladder = list(ctx.cfg["ladder"])
    order = ctx.cfg["radial_jet_order"] if ctx.flat_like else ctx.cfg["jet_order"]
    exponent, table = discrepancy_scaling(ctx.model, x, tau, theta, ladder,
                                          order=order, steps=steps)
    ctx.tables[f"discrepancy_{ctx.name}"] = [("nonradial", s, d) for s, d in table]
    worst = max(d for _, d in table)
    if ctx.flat_like:
        tol = (1e-10 if ctx.name.startswith("flat") else 1e-8) * ctx.cfg["tol_scale"]
        out.append(_record(ctx, "transport.flat_equivalence",
                           "zero-curvature-agreement", x,
                           {"ladder": ladder}, {"max_discrepancy": worst}, tol))
    else:
        out.append(_record(ctx, "transport.discrepancy_scaling",
                           "finite-vs-integrated-gap", x, {"ladder": ladder},
                           {"max_discrepancy": worst, "exponent": exponent},
                           None, ok=exponent >= 2.0 - 0.15, exponent=exponent))
        out.append(_record(ctx, "transport.discrepancy_values",
                           "finite-vs-integrated-gap", x,
                           {"ladder": ladder},
                           {f"D_{s:g}": d for s, d in table}, None, measured=True))
    # radial contraction stays tight at every rung
    jet = ctx.jet(x, order=ctx.cfg["radial_jet_order"])
    radial_worst = 0.0
    for s in ladder:
        t_disp, tau_p, path = radial_probe(ctx.model, x, tau, s, steps=steps)
        lam = jet.eval_lambda(t_disp)
        ode = ode_transport(ctx.model, path).matrix
        radial_worst = max(radial_worst,
                           float(np.max(np.abs((lam - ode) @ tau_p))))
    out.append(_record(ctx, "transport.radial_contraction",
                       "radial-gap-on-ladder", x, {"ladder": ladder},
                       {"max_radial_gap": radial_worst},
                       1e-6 * ctx.cfg["tol_scale"]))


def check_metric_compat_scaling(ctx, out):
    if not ctx.riemannian:
        return
    x = ctx.points()[0]
    tau = ctx.tau(x)
    jet = ctx.jet(x, order=ctx.cfg["radial_jet_order"])
    steps = ctx.cfg["connect_steps"]
    ladder = ctx.cfg["scaling_ladder"] if not ctx.flat_like else ctx.cfg["ladder"]
    sizes, radials, fulls = [], [], []
    for s in ladder:
        t_disp, tau_p, _ = radial_probe(ctx.model, x, tau, s, steps=steps)
        radial, full = metric_compat_residual(ctx.model, jet, t_disp,
                                              steps=steps, tau_prime=tau_p)
        sizes.append(float(np.linalg.norm(t_disp)))
        radials.append(radial)
        fulls.append(full)
    ctx.tables[f"metric_compat_{ctx.name}"] = (
        [("radial", s, r) for s, r in zip(sizes, radials)]
        + [("full", s, r) for s, r in zip(sizes, fulls)]
    )
    out.append(_record(ctx, "transport.metric_compat_radial",
                       "radial-length-preservation", x,
                       {"ladder": list(ladder)},
                       {"max_radial": max(radials)}, 1e-6 * ctx.cfg["tol_scale"]))
    if ctx.flat_like:
        tol = (1e-10 if ctx.name.startswith("flat") else 1e-8) * ctx.cfg["tol_scale"]
        out.append(_record(ctx, "transport.metric_compat_full",
                           "full-length-preservation-flat", x, {},
                           {"max_full": max(fulls)}, tol))
    else:
        exponent = fd.fit_loglog_slope(sizes, fulls)
        out.append(_record(ctx, "transport.metric_compat_full",
                           "full-length-preservation-decay", x,
                           {"ladder": list(ladder)},
                           {"max_full": max(fulls), "exponent": exponent},
                           None, ok=exponent >= 2.0 - 0.15, exponent=exponent))


def check_composition(ctx, out):
    x = ctx.points()[0]
    tau = ctx.tau(x)
    steps = ctx.cfg["connect_steps"]
    order = ctx.cfg["radial_jet_order"]
    ladder = ctx.cfg["ladder"] if ctx.name.startswith("flat") \
        else ctx.cfg["scaling_ladder"]
    sizes, full_res, radial_res = [], [], []
    for s in ladder:
        defect, info = composition_defect(ctx.model, x, tau, 0.5 * s, 0.5 * s,
                                          order=order, steps=steps)
        sizes.append(s)
        full_res.append(float(np.max(np.abs(defect))))
        radial_res.append(float(np.max(np.abs(defect @ info["tau_second"]))))
    ctx.tables[f"composition_{ctx.name}"] = (
        [("full", s, r) for s, r in zip(sizes, full_res)]
        + [("radial", s, r) for s, r in zip(sizes, radial_res)]
    )
    out.append(_record(ctx, "transport.composition_radial",
                       "two-leg-pullback-match", x,
                       {"ladder": list(ladder)},
                       {"max_radial": max(radial_res)},
                       1e-6 * ctx.cfg["tol_scale"]))
    if ctx.flat_like:
        tol = (1e-12 if ctx.name.startswith("flat") else 1e-8) * ctx.cfg["tol_scale"]
        out.append(_record(ctx, "transport.composition_full",
                           "two-leg-matrix-match-flat", x, {},
                           {"max_full": max(full_res)}, tol))
    else:
        exponent = fd.fit_loglog_slope(sizes, full_res)
        out.append(_record(ctx, "transport.composition_full",
                           "two-leg-matrix-decay", x,
                           {"ladder": list(ladder)},
                           {"max_full": max(full_res), "exponent": exponent},
                           None, ok=exponent >= 2.0 - 0.15, exponent=exponent))


# --- group -------------------------------------------------------------------


def check_group_identity(ctx, out):
    steps = ctx.cfg["connect_steps"]
    for x in ctx.points():
        tau = ctx.tau(x, magnitude=0.15)
        elem = group_element(ctx.model, x, tau)
        jet = ctx.jet(x)
        product, _ = multiply(ctx.model, x, elem, np.zeros_like(tau), jet=jet,
                              steps=steps)
        res = {"right_identity": np.max(np.abs(product.t - tau))}
        out.append(_record(ctx, "group.identity", "unit-element", x, {}, res,
                           1e-6 * ctx.cfg["tol_scale"]))


def check_group_associativity(ctx, out):
    x = ctx.points()[0]
    steps = ctx.cfg["connect_steps"]
    jet = ctx.jet(x)
    tau = ctx.tau(x, magnitude=0.3)
    path = shoot(ctx.model, x, tau, 1.0, steps=steps)
    s1, s2, s3 = 0.15, 0.2, 0.1

    first = group_element(ctx.model, x, s1 * tau)
    ab, _ = multiply(ctx.model, x, first, path_tangent_rule(path, s2),
                     jet=jet, steps=steps)
    ab_c, _ = multiply(ctx.model, x, ab, path_tangent_rule(path, s3),
                       jet=jet, steps=steps)

    leg1 = shoot(ctx.model, x, s1 * tau, 1.0, steps=steps)
    xp = leg1.end_point
    jet_p = deformation_jet(ctx.model, xp, order=ctx.cfg["jet_order"])
    # end tangent of the rescaled leg is s1 * tau(s1), exactly on-grid
    second = group_element(ctx.model, xp, (s2 / s1) * leg1.end_tangent)
    bc, _ = multiply(ctx.model, xp, second, path_tangent_rule(path, s3),
                     jet=jet_p, steps=steps)
    bc_rule = group_element(ctx.model, xp, bc.t)
    a_bc, _ = multiply(ctx.model, x, first, bc_rule, jet=jet, steps=steps)
    res = {"associativity": np.max(np.abs(ab_c.t - a_bc.t))}
    out.append(_record(ctx, "group.associativity", "collinear-triple", x,
                       {"s": [s1, s2, s3]}, res, 1e-6 * ctx.cfg["tol_scale"]))


def check_aux_matrices(ctx, out):
    steps = ctx.cfg["connect_steps"]
    x = ctx.points()[0]
    n = ctx.model.dimension
    jet = ctx.jet(x)
    zero = group_element(ctx.model, x, np.zeros(n))
    lam0, mu0 = aux_matrices(ctx.model, x, zero, jet=jet, steps=steps)
    res = {
        "lambda_identity": np.max(np.abs(lam0.matrix - np.eye(n))),
        "mu_identity": np.max(np.abs(mu0.matrix - np.eye(n))),
    }
    out.append(_record(ctx, "group.aux_identity", "identity-at-unit", x, {},
                       res, 1e-8 * ctx.cfg["tol_scale"]))
    tau = ctx.tau(x, magnitude=0.15)
    elem = group_element(ctx.model, x, tau)
    lam, _ = aux_matrices(ctx.model, x, elem, jet=jet, steps=steps)
    K = eval_K(ctx.model, x, elem, steps=steps)
    lam_jet = frame_lambda_from_jet(ctx.model, jet, K, "coordinate")
    res = {"lambda_fd_vs_jet": np.max(np.abs(lam.matrix - lam_jet))}
    out.append(_record(ctx, "group.lambda_cross_check", "two-constructions",
                       x, {}, res, 1e-4 * ctx.cfg["tol_scale"]))


def check_gamma_coefficients(ctx, out):
    x = ctx.points()[0]
    n = ctx.model.dimension
    gamma = christoffel(ctx.model, x).gamma
    coord = gamma_coefficients(ctx.model, x, "coordinate")
    res = {"coordinate_frame": np.max(np.abs(coord - gamma))}
    out.append(_record(ctx, "group.gamma_coordinate", "frame-connection", x, {},
                       res, 1e-10 * ctx.cfg["tol_scale"]))
    if not ctx.riemannian:
        return
    kind = "orthonormal"
    gam = gamma_coefficients(ctx.model, x, kind)
    steps = ctx.cfg["connect_steps"]
    jet = ctx.jet(x)
    d = 1e-4 * ctx.scale(x)
    dlam = np.empty((n, n, n))
    dmu = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = d
        lp, mp = aux_matrices(ctx.model, x, group_element(ctx.model, x, e, kind),
                              jet=jet, steps=steps)
        lm, mm = aux_matrices(ctx.model, x, group_element(ctx.model, x, -e, kind),
                              jet=jet, steps=steps)
        dlam[:, k, :] = (lp.matrix - lm.matrix) / (2 * d)
        dmu[:, :, k] = (mp.matrix - mm.matrix) / (2 * d)
    res = {
        "lambda_derivative": np.max(np.abs(dlam - gam)),
        "mu_derivative": np.max(np.abs(dmu - gam)),
        "two_estimates": np.max(np.abs(dlam - dmu)),
    }
    out.append(_record(ctx, "group.gamma_from_aux", "first-derivative-match",
                       x, {"frame": kind}, res, 1e-4 * ctx.cfg["tol_scale"]))


def check_rho_from_mu(ctx, out):
    x = ctx.points()[0]
    n = ctx.model.dimension
    steps = ctx.cfg["connect_steps"]
    jet = ctx.jet(x)
    h = ctx.cfg["rho_step"] * ctx.scale(x)

    def mu_at(tvec):
        _, mu = aux_matrices(ctx.model, x, group_element(ctx.model, x, tvec),
                             jet=jet, steps=steps)
        return mu.matrix

    mu0 = mu_at(np.zeros(n))
    rho = np.empty((n, n, n, n))
    cache = {}

    def mu_cached(vec):
        key = tuple(np.round(vec / h, 6))
        if key not in cache:
            cache[key] = mu_at(vec)
        return cache[key]

    for l in range(n):
        for k in range(l, n):
            el = np.zeros(n)
            el[l] = h
            ek = np.zeros(n)
            ek[k] = h
            if l == k:
                second = (mu_cached(el) - 2.0 * mu0 + mu_cached(-el)) / h**2
            else:
                second = (mu_cached(el + ek) - mu_cached(el - ek)
                          - mu_cached(-el + ek) + mu_cached(-el - ek)) / (4 * h**2)
            rho[:, l, k, :] = second
            rho[:, k, l, :] = second
    R = riemann(ctx.model, x).components
    R_est = rho - rho.transpose(0, 1, 3, 2)
    sym = (rho + rho.transpose(0, 2, 3, 1) + rho.transpose(0, 3, 1, 2)
           + rho.transpose(0, 2, 1, 3) + rho.transpose(0, 1, 3, 2)
           + rho.transpose(0, 3, 2, 1)) / 6.0
    res = {
        "skew_vs_curvature": np.max(np.abs(R_est - R)),
        "fully_symmetric_part": np.max(np.abs(sym)),
    }
    out.append(_record(ctx, "group.rho_from_mu", "nested-fd-curvature", x,
                       {"step": h}, res, 1e-3 * ctx.cfg["tol_scale"]))


def check_canonical_law(ctx, out):
    x = ctx.points()[0]
    tau = ctx.tau(x, magnitude=0.25)
    steps = ctx.cfg["connect_steps"]
    for s1, s2 in ((0.1, 0.1), (0.1, 0.2), (0.2, 0.2)):
        res = canonical_law_residuals(ctx.model, x, tau, s1, s2,
                                      order=ctx.cfg["jet_order"], steps=steps)
        out.append(_record(ctx, "group.canonical_law", "one-parameter-product",
                           x, {"s1": s1, "s2": s2},
                           {"r28": res["r28"], "r29": res["r29"]},
                           1e-6 * ctx.cfg["tol_scale"]))
        out.append(_record(ctx, "group.left_factor_forms", "left-closing-term",
                           x, {"s1": s1, "s2": s2},
                           {"literal": res["r30_literal"],
                            "derivative": res["r30_dot"]},
                           None, measured=True))


def check_reframe(ctx, out):
    x = ctx.points()[0]
    tau = ctx.tau(x)
    steps = ctx.cfg["connect_steps"]
    jet = ctx.jet(x)
    t_disp, tau_p, _ = radial_probe(ctx.model, x, tau, 0.8, steps=steps)
    base_res = canonicity_residual(jet, ctx.model, t_disp, tau_p)
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    n = ctx.model.dimension
    rot = np.eye(n)
    rot[:2, :2] = [[c, -s], [s, c]]
    rotated = reframe_jet(jet, rot)
    rot_res = canonicity_residual(rotated, ctx.model, t_disp, tau_p)
    doubled = reframe_jet(jet, 2.0 * np.eye(n))
    res = {
        "rotation_invariance": abs(rot_res - base_res),
        "scaling_lambda_unchanged": np.max(np.abs(
            doubled.eval_lambda(t_disp) - jet.eval_lambda(t_disp))),
    }
    out.append(_record(ctx, "group.reframe_invariance", "component-rotation",
                       x, {}, res, 1e-10 * ctx.cfg["tol_scale"]))


# --- action ------------------------------------------------------------------


def check_action(ctx, out):
    if not ctx.riemannian:
        return
    x = ctx.points()[0]
    tau = ctx.tau(x)
    steps = ctx.cfg["connect_steps"]
    end = shoot(ctx.model, x, tau, 1.0, steps=steps).end_point
    S_fwd = action_value(ctx.model, x, end, steps=steps)
    S_bwd = action_value(ctx.model, end, x, steps=steps,
                         locality=2.0 * ctx.model.locality_radius(x))
    half = shoot(ctx.model, x, 0.5 * tau, 1.0, steps=steps).end_point
    S_half = action_value(ctx.model, x, half, steps=steps)
    res = {
        "symmetry": abs(S_fwd - S_bwd),
        "quadratic_scaling": abs(S_half - 0.25 * S_fwd),
    }
    out.append(_record(ctx, "action.structure", "energy-symmetry-and-scaling",
                       x, {}, res, 1e-8 * ctx.cfg["tol_scale"]))
    hj = hj_residual(ctx.model, x, end, steps=steps)
    out.append(_record(ctx, "action.hamilton_jacobi", "squared-gradient-identity",
                       x, {}, {"residual": hj}, 1e-5 * ctx.cfg["tol_scale"]))


def check_gradient_relation(ctx, out):
    if not ctx.riemannian:
        return
    x = ctx.points()[0]
    tau = ctx.tau(x)
    steps = ctx.cfg["connect_steps"]
    sizes, fulls = [], []
    for s in ctx.cfg["ladder"]:
        end = shoot(ctx.model, x, s * tau, 1.0, steps=steps).end_point
        sizes.append(float(np.linalg.norm(end - x)))
        fulls.append(gradient_relation_residual(ctx.model, x, end,
                                                order=ctx.cfg["jet_order"],
                                                steps=steps))
    ctx.tables[f"gradient_relation_{ctx.name}"] = [
        ("full", s, r) for s, r in zip(sizes, fulls)
    ]
    if ctx.flat_like:
        out.append(_record(ctx, "action.gradient_relation", "transported-gradient",
                           x, {}, {"max_full": max(fulls)},
                           1e-7 * ctx.cfg["tol_scale"]))
    else:
        exponent = fd.fit_loglog_slope(sizes, fulls)
        ok = max(fulls) <= 1e-3 and (exponent >= 2.0 - 0.15 or max(fulls) <= 1e-7)
        out.append(_record(ctx, "action.gradient_relation", "transported-gradient",
                           x, {"ladder": list(ctx.cfg["ladder"])},
                           {"max_full": max(fulls), "exponent": exponent},
                           None, ok=ok, exponent=exponent))


_CHECKS = [
    check_metric_structure,
    check_connection,
    check_curvature,
    check_vielbein,
    check_speed_conservation,
    check_convergence_order,
    check_connect_roundtrip,
    check_first_integral,
    check_jet_boundary,
    check_jet_oracle,
    check_jet_scaling,
    check_jet_order_consistency,
    check_rho_identities,
    check_exp_log_roundtrip,
    check_radial_transport,
    check_ode_metric_compat,
    check_transport_discrepancy,
    check_metric_compat_scaling,
    check_composition,
    check_group_identity,
    check_group_associativity,
    check_aux_matrices,
    check_gamma_coefficients,
    check_rho_from_mu,
    check_canonical_law,
    check_reframe,
    check_action,
    check_gradient_relation,
]


def merge_config(overrides=None):
    cfg = dict(DEFAULT_CONFIG)
    if overrides:
        unknown = set(overrides) - set(cfg)
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)
    return cfg


def run_suite(config=None):
    """Run every check on every configured model; returns a SuiteResult."""
    cfg = merge_config(config)
    kernels.set_backend(cfg["backend"])
    try:
        contexts = [_Ctx(name, cfg) for name in cfg["models"]]
        tasks = [(ctx, fn) for ctx in contexts for fn in _CHECKS]

        def run_task(task):
            ctx, fn = task
            records = []
            try:
                fn(ctx, records)
            except (TransportLabError, ValueError) as exc:
                records.append(CheckRecord(
                    check=fn.__name__.replace("check_", "error."),
                    anchor="check-execution",
                    model=ctx.name,
                    point=None,
                    inputs={"error": f"{type(exc).__name__}: {exc}"},
                    residuals={},
                    tolerance=None,
                    status="assert-fail",
                    exponent=None,
                ))
            return records

        workers = max(1, int(cfg["workers"]))
        all_records = []
        if workers == 1:
            for task in tasks:
                all_records.extend(run_task(task))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for recs in pool.map(run_task, tasks):
                    all_records.extend(recs)
        # report assembly is sequential and deterministic regardless of
        # worker interleaving
        all_records.sort(key=lambda r: r.sort_key())
        tables = {}
        for ctx in contexts:
            tables.update(ctx.tables)
        return SuiteResult(records=all_records, tables=tables)
    finally:
        kernels.set_backend("auto")


# --- deterministic serialization ----------------------------------------------


def _json_scalar(value):
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return "null"
        return format(v, ".17g")
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise SpecError(f"cannot serialize {type(value)}")


def _render(value, indent):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        rows = [
            f'{pad}  "{k}": {_render(v, indent + 1)}' for k, v in value.items()
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        rows = [f"{pad}  {_render(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    return _json_scalar(value)


def render_report(result, config=None, version="0.1.0"):
    """Deterministic JSON text of a suite result."""
    cfg = merge_config(config)
    records = []
    for r in result.records:
        records.append({
            "check": r.check,
            "anchor": r.anchor,
            "model": r.model,
            "point": r.point,
            "inputs": {k: r.inputs[k] for k in sorted(r.inputs)},
            "residuals": {k: r.residuals[k] for k in sorted(r.residuals)},
            "exponent": r.exponent,
            "tolerance": r.tolerance,
            "status": r.status,
        })
    failed = len(result.failed)
    report = {
        "schema": SCHEMA_VERSION,
        "tool": "transportlab",
        "version": version,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "summary": {
            "checks": len(records),
            "assert_failed": failed,
            "measured": sum(1 for r in result.records if r.status == "measured"),
        },
        "checks": records,
    }
    return _render(report, 0) + "\n"


def render_table_csv(rows):
    """CSV text for a residual ladder table: s, residual, kind."""
    lines = ["s,residual,kind"]
    for kind, s, value in rows:
        lines.append(f"{format(float(s), '.17g')},{format(float(value), '.17g')},{kind}")
    return "\n".join(lines) + "\n"
