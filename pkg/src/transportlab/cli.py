"""Command-line entry point.

Subcommands: geodesic, connect, transport, jet, action, verify.
Exit codes: 0 success, 1 bad input or failed assertions, 2 domain exit,
3 two-point solve failure.  Diagnostics go to stderr; results go to
stdout or --out.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

import numpy as np

from . import verify as verify_mod
from .action import action_value, hj_residual
from .errors import (
    ConvergenceError,
    DomainError,
    SpecError,
    TransportLabError,
)
from .geodesic import connect, shoot
from .jets import deformation_jet
from .manifold import load_manifold
from .transport import finite_transport, ode_transport

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_DOMAIN = 2
EXIT_BVP = 3


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise SpecError(f"cannot parse vector {text!r}") from exc


def _resolve_model(args):
    if getattr(args, "spec", None):
        with open(args.spec, "r", encoding="utf-8") as fh:
            return load_manifold(json.load(fh))
    if getattr(args, "manifold", None):
        return load_manifold(args.manifold)
    raise SpecError("need --manifold or --spec")


def _emit(text, out):
    if out:
        pathlib.Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fmt_vec(vec):
    return [float(format(v, ".17g")) for v in vec]


def cmd_geodesic(args):
    model = _resolve_model(args)
    path = shoot(model, _parse_vector(args.x), _parse_vector(args.tau),
                 args.T, steps=args.steps)
    _emit(path.to_csv_string(), args.out)
    return EXIT_OK


def cmd_connect(args):
    model = _resolve_model(args)
    tau = connect(model, _parse_vector(args.x), _parse_vector(args.xp),
                  steps=args.steps,
                  locality=args.locality)
    _emit(json.dumps({"tau": _fmt_vec(tau)}, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_transport(args):
    model = _resolve_model(args)
    x = _parse_vector(args.x)
    xp = _parse_vector(args.xp)
    theta = _parse_vector(args.theta)
    tau = connect(model, x, xp, steps=args.steps, locality=args.locality)
    path = shoot(model, x, tau, 1.0, steps=args.steps)
    result = {}
    if args.method in ("jet", "both"):
        jet = deformation_jet(model, x, order=args.order)
        result["jet"] = _fmt_vec(finite_transport(jet, xp - x, theta))
    if args.method in ("ode", "both"):
        result["ode"] = _fmt_vec(ode_transport(model, path).matrix @ theta)
    if args.method == "both":
        gap = max(abs(a - b) for a, b in zip(result["jet"], result["ode"]))
        result["discrepancy"] = float(format(gap, ".17g"))
        result["discrepancy_status"] = "measured"
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_jet(args):
    model = _resolve_model(args)
    jet = deformation_jet(model, _parse_vector(args.x), order=args.order)
    _emit(jet.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_action(args):
    model = _resolve_model(args)
    x = _parse_vector(args.x)
    xp = _parse_vector(args.xp)
    S = action_value(model, x, xp, steps=args.steps, locality=args.locality)
    result = {"action": float(format(S, ".17g"))}
    if args.hj:
        res = hj_residual(model, x, xp, steps=args.steps, locality=args.locality)
        result["hj_residual"] = float(format(res, ".17g"))
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args):
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise SpecError("config file must hold a JSON object")
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.tol_scale is not None:
        overrides["tol_scale"] = args.tol_scale
    if args.manifold:
        overrides["models"] = [args.manifold]
    result = verify_mod.run_suite(overrides)
    text = verify_mod.render_report(result, overrides)
    _emit(text, args.out)
    if args.out:
        table_dir = pathlib.Path(args.out).with_suffix(".tables")
        table_dir.mkdir(exist_ok=True)
        for name, rows in sorted(result.tables.items()):
            (table_dir / f"{name}.csv").write_text(
                verify_mod.render_table_csv(rows), encoding="utf-8"
            )
    for record in result.records:
        if record.status == "assert-fail":
            print(f"FAIL {record.model}: {record.check} {record.residuals} "
                  f"{record.inputs.get('error', '')}", file=sys.stderr)
    ok = not result.failed
    print(f"{'PASS' if ok else 'FAIL'}: {len(result.records)} checks, "
          f"{len(result.failed)} failed", file=sys.stderr)
    return EXIT_OK if ok else EXIT_BAD_INPUT


def build_parser():
    parser = argparse.ArgumentParser(
        prog="transportlab",
        description="Geodesic transport laboratory: compute and verify "
                    "finite parallel transports on chart-local manifolds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, xp=False):
        p.add_argument("--manifold", help="catalog id (flat2, sphere2, ...)")
        p.add_argument("--spec", help="path to a manifold spec JSON file")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--steps", type=int, default=512)
        p.add_argument("--x", required=True, help="base point, comma separated")
        if xp:
            p.add_argument("--xp", required=True, help="target point")
            p.add_argument("--locality", type=float, default=None,
                           help="override the normal-neighborhood radius")

    p = sub.add_parser("geodesic", help="integrate a geodesic, write CSV")
    add_common(p)
    p.add_argument("--tau", required=True, help="initial velocity")
    p.add_argument("--T", type=float, default=1.0)
    p.set_defaults(fn=cmd_geodesic)

    p = sub.add_parser("connect", help="solve the two-point problem")
    add_common(p, xp=True)
    p.set_defaults(fn=cmd_connect)

    p = sub.add_parser("transport", help="transport a vector between points")
    add_common(p, xp=True)
    p.add_argument("--theta", required=True, help="vector at the target point")
    p.add_argument("--method", choices=("jet", "ode", "both"), default="both")
    p.add_argument("--order", type=int, default=6)
    p.set_defaults(fn=cmd_transport)

    p = sub.add_parser("jet", help="dump series coefficients as JSON")
    add_common(p)
    p.add_argument("--order", type=int, default=6)
    p.set_defaults(fn=cmd_jet)

    p = sub.add_parser("action", help="two-point energy and its gradient check")
    add_common(p, xp=True)
    p.add_argument("--hj", action="store_true",
                   help="also report the squared-gradient residual")
    p.set_defaults(fn=cmd_action)

    p = sub.add_parser("verify", help="run the residual verification suite")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--manifold", help="restrict to one catalog model")
    p.add_argument("--out", help="report path (tables land beside it)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tol-scale", dest="tol_scale", type=float, default=None)
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"two-point solve failed: {exc}", file=sys.stderr)
        return EXIT_BVP
    except (SpecError, TransportLabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
