"""Truncated Taylor expansions of the displacement-to-velocity map.

For a base point x, H(x, t) maps a chart displacement t to the initial
velocity of the geodesic that reaches x + t at affine parameter 1 (the
chart logarithm map).  Radial constancy of the pulled-back tangent
forces H to invert the exponential displacement E(tau) = exp_x(tau) - x,
so the coefficients are built in two exact steps from the connection
and its derivatives at x:

1. exponential jets: symmetric tensors T_m with
   E(tau) = sum_m T_m[tau^m] / m!, obtained by matching powers of the
   affine parameter in the geodesic equation (T_1 = I, T_2 = -Gamma);

2. series inversion: C_m with H(t) = sum_m C_m[t^m] / m! solving
   H(E(tau)) = tau order by order (C_2 = Gamma, and C_3 is the
   symmetrized dGamma + Gamma.Gamma combination).

Coefficients are stored packed over sorted multi-indices; full tensors
are expanded (and cached) only when a jet is evaluated.  The module
also provides an independent sampling oracle (``jet_from_log_samples``)
that integrates a stencil of geodesics and fits the inverse pairs by
least squares, never touching the recurrence; agreement of the two
constructions is one of the headline checks of the package.
"""

from __future__ import annotations

import itertools
import json
import math

import numpy as np

from . import kernels
from .errors import IllConditionedFitError, SpecError, TrustRadiusError
from .manifold import christoffel

_MIN_ORDER = 2
_MAX_ORDER = 8
_COND_LIMIT = 1e10
_LETTERS = "abcdefghijklmnopqrstuvwxy"


def sorted_multi_indices(n, m):
    return list(itertools.combinations_with_replacement(range(n), m))


def _pack(full_m, n, m):
    idxs = sorted_multi_indices(n, m)
    values = np.empty((n, len(idxs)))
    for col, idx in enumerate(idxs):
        values[:, col] = full_m[(slice(None),) + idx]
    return idxs, values


def _unpack(idxs, values, n, m):
    full = np.zeros((n,) + (n,) * m)
    for col, idx in enumerate(idxs):
        for perm in set(itertools.permutations(idx)):
            full[(slice(None),) + perm] = values[:, col]
    return full


def _merge_symmetric_pair(T, a, b):
    """Symmetrize the first a+b lower axes, given that axes [0, a) and
    [a, a+b) are each already symmetric: average over the C(a+b, a)
    shuffles of the two blocks."""
    total = a + b
    trailing = list(range(1 + total, T.ndim))
    out = np.zeros_like(T)
    count = 0
    for combo in itertools.combinations(range(total), a):
        rest = [p for p in range(total) if p not in combo]
        perm = [0] * total
        for src, dst in enumerate(combo):
            perm[dst] = src
        for src, dst in enumerate(rest, start=a):
            perm[dst] = src
        out += T.transpose([0] + [1 + p for p in perm] + trailing)
        count += 1
    return out / count


def _symmetrize_groups(T, groups):
    """Average T over permutations of its lower axes, exploiting that the
    axes inside each group are already mutually symmetric.

    ``groups`` are consecutive block sizes of the lower axes (axis 0 is
    the upper index and stays put).  Blocks merge pairwise: each merge
    averages over block shuffles only, which reproduces the full
    symmetrization at a fraction of the factorial cost.
    """
    sizes = [g for g in groups if g > 0]
    if len(sizes) <= 1:
        return T
    merged = sizes[0]
    for nxt in sizes[1:]:
        T = _merge_symmetric_pair(T, merged, nxt)
        merged += nxt
    return T


def _partitions(total, max_part=None):
    """Descending tuples of positive integers summing to ``total``."""
    if total == 0:
        yield ()
        return
    if max_part is None or max_part > total:
        max_part = total
    for first in range(max_part, 0, -1):
        for rest in _partitions(total - first, first):
            yield (first,) + rest


def _arrangements(parts):
    """Number of distinct orderings of a multiset tuple."""
    total = math.factorial(len(parts))
    for _, group in itertools.groupby(parts):
        total //= math.factorial(sum(1 for _ in group))
    return total


def _compose(core, families, assigned):
    """Contract ``core``'s lower axes with the tensors in ``assigned``.

    ``core`` has one upper axis then lower axes; ``families`` partitions
    the lower-axis positions into mutually-symmetric groups.
    ``assigned[i]`` is the symmetric tensor whose upper index contracts
    lower axis i, or None for an identity (axis left free).  Returns
    (tensor, groups): the free lower axes are ordered with non-identity
    blocks first, then leftover identity axes grouped per family, and
    ``groups`` lists those block sizes for _symmetrize_groups.
    """
    pool = iter(_LETTERS)
    upper = "z"
    core_letters = [next(pool) for _ in range(core.ndim - 1)]
    operands = [core]
    subs = [upper + "".join(core_letters)]
    out_blocks = []
    for i, part in enumerate(assigned):
        if part is None:
            continue
        part_letters = [next(pool) for _ in range(part.ndim - 1)]
        operands.append(part)
        subs.append(core_letters[i] + "".join(part_letters))
        out_blocks.append("".join(part_letters))
    groups = [len(b) for b in out_blocks]
    for family in families:
        leftover = [core_letters[i] for i in family if assigned[i] is None]
        if leftover:
            out_blocks.append("".join(leftover))
            groups.append(len(leftover))
    out = upper + "".join(out_blocks)
    tensor = np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)
    return tensor, groups


def exponential_jets(model, x, order):
    """Symmetric tensors T_m of the exponential displacement, m = 1..order.

    Matching the coefficient of s^(m-2) in d^2 a / ds^2 = -Gamma(x+a) da da
    yields, for m >= 3,

        T_m = -(m-2)! * sum  [count / (r! prod(p_i!) (q1-1)! (q2-1)!)]
                        Sym( d^(r)Gamma [T_q1, T_q2, T_p1..T_pr] )

    over q1 + q2 + sum(p_i) = m with all parts >= 1.
    """
    x = model.require_point(x)
    n = model.dimension
    cc = christoffel(model, x, deriv_order=order - 2, max_order=max(4, order - 2))
    gamma_stack = [cc.gamma, *cc.derivs]

    T = {1: np.eye(n), 2: -gamma_stack[0]} if order >= 2 else {1: np.eye(n)}
    for m in range(3, order + 1):
        total = np.zeros((n,) + (n,) * m)
        for q1 in range(1, m):
            for q2 in range(1, q1 + 1):
                rem = m - q1 - q2
                q_count = 1 if q1 == q2 else 2
                for P in _partitions(rem):
                    r = len(P)
                    if r >= len(gamma_stack):
                        continue
                    core = gamma_stack[r]  # [upper, a, b, d1..dr]
                    families = [[0, 1], list(range(2, 2 + r))]
                    assigned = [
                        T[q1] if q1 > 1 else None,
                        T[q2] if q2 > 1 else None,
                    ] + [T[p] if p > 1 else None for p in P]
                    tensor, groups = _compose(core, families, assigned)
                    denom = (
                        math.factorial(r)
                        * math.prod(math.factorial(p) for p in P)
                        * math.factorial(q1 - 1)
                        * math.factorial(q2 - 1)
                    )
                    coeff = (
                        math.factorial(m - 2)
                        * q_count
                        * _arrangements(P)
                        / denom
                    )
                    total += coeff * _symmetrize_groups(tensor, groups)
        T[m] = -total
    return T


def _invert_series(T, order, n):
    """Coefficients C_m of the inverse series: H(E(tau)) = tau."""
    C = {1: np.eye(n)}
    for m in range(2, order + 1):
        acc = np.zeros((n,) + (n,) * m)
        for k in range(1, m):
            for parts in _partitions(m):
                if len(parts) != k:
                    continue
                core = C[k]
                families = [list(range(k))]
                assigned = [T[p] if p > 1 else None for p in parts]
                tensor, groups = _compose(core, families, assigned)
                coeff = (
                    math.factorial(m)
                    * _arrangements(parts)
                    / (
                        math.factorial(k)
                        * math.prod(math.factorial(p) for p in parts)
                    )
                )
                acc += coeff * _symmetrize_groups(tensor, groups)
        C[m] = -acc
    return C


class DeformationJet:
    """Packed Taylor coefficients of the displacement-to-velocity map.

    ``eval_H`` returns the jet's own components (frame-valued if the jet
    was reframed); ``eval_lambda`` and ``eval_hessian`` always return
    coordinate-basis objects, pulling back through the frame transform
    when one is attached.
    """

    def __init__(self, base, order, packed, trust_radius, frame_transform=None):
        self.base = np.asarray(base, dtype=float)
        self.order = int(order)
        self._packed = packed  # dict m -> (indices, values)
        self.trust_radius = float(trust_radius)
        self.frame_transform = (
            None if frame_transform is None else np.asarray(frame_transform, float)
        )
        self._full_cache = {}

    @property
    def dimension(self):
        return self.base.size

    def coefficient(self, mu, lower=()):
        idx = tuple(sorted(lower))
        idxs, values = self._packed[len(idx)]
        return float(values[mu, idxs.index(idx)])

    def full(self, m):
        if m not in self._full_cache:
            idxs, values = self._packed[m]
            self._full_cache[m] = _unpack(idxs, values, self.dimension, m)
        return self._full_cache[m]

    def check_trust(self, t_disp):
        r = float(np.linalg.norm(t_disp))
        if r > self.trust_radius * (1.0 + 1e-12):
            raise TrustRadiusError(
                f"|t| = {r:.4g} exceeds trust radius {self.trust_radius:.4g}"
            )

    def _contract(self, m, t, keep_axes):
        T = self.full(m)
        for _ in range(m - keep_axes):
            T = np.tensordot(T, t, axes=([T.ndim - 1], [0]))
        return T

    def eval_H(self, t_disp, check_trust=True):
        """Truncated series value at displacement ``t_disp``."""
        t = np.asarray(t_disp, dtype=float)
        if check_trust:
            self.check_trust(t)
        out = np.zeros(self.dimension)
        for m in range(self.order + 1):
            out += self._contract(m, t, 0) / math.factorial(m)
        return out

    def eval_lambda(self, t_disp, check_trust=True):
        """Term-by-term derivative of the series: the transport matrix."""
        t = np.asarray(t_disp, dtype=float)
        if check_trust:
            self.check_trust(t)
        out = np.zeros((self.dimension, self.dimension))
        for m in range(1, self.order + 1):
            out += self._contract(m, t, 1) / math.factorial(m - 1)
        if self.frame_transform is not None:
            out = np.linalg.solve(self.frame_transform, out)
        return out

    def eval_hessian(self, t_disp, check_trust=True):
        """Second displacement derivative, coordinate basis, shape (n, n, n)."""
        t = np.asarray(t_disp, dtype=float)
        if check_trust:
            self.check_trust(t)
        out = np.zeros((self.dimension,) * 3)
        for m in range(2, self.order + 1):
            out += self._contract(m, t, 2) / math.factorial(m - 2)
        if self.frame_transform is not None:
            out = np.einsum(
                "mn,n...->m...", np.linalg.inv(self.frame_transform), out
            )
        return out

    # -- serialization ------------------------------------------------------

    def to_json(self):
        """Dump format: base point, order, coefficient map keyed
        'mu,nu1,...,nuk' (sorted lower indices), 17 significant digits."""
        coeffs = {}
        for m in range(self.order + 1):
            idxs, values = self._packed[m]
            for col, idx in enumerate(idxs):
                for mu in range(self.dimension):
                    key = ",".join(str(i) for i in (mu,) + idx)
                    coeffs[key] = float(format(values[mu, col], ".17g"))
        return json.dumps(
            {
                "base": [float(format(v, ".17g")) for v in self.base],
                "order": self.order,
                "trust_radius": float(format(self.trust_radius, ".17g")),
                "coeffs": dict(sorted(coeffs.items())),
            },
            indent=2,
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        base = np.asarray(data["base"], dtype=float)
        n = base.size
        order = int(data["order"])
        packed = {}
        for m in range(order + 1):
            idxs = sorted_multi_indices(n, m)
            values = np.zeros((n, len(idxs)))
            packed[m] = (idxs, values)
        for key, value in data["coeffs"].items():
            parts = tuple(int(p) for p in key.split(","))
            mu, idx = parts[0], tuple(sorted(parts[1:]))
            idxs, values = packed[len(idx)]
            values[mu, idxs.index(idx)] = value
        return cls(base, order, packed, data["trust_radius"])


def default_trust_radius(model, x):
    return 0.5 * model.locality_radius(x)


def deformation_jet(model, x, order=6, trust_radius=None):
    """Jet built from the connection by the coefficient recurrence
    (exponential jets + series inversion); needs connection derivatives
    up to order - 2 at the base point."""
    x = model.require_point(x)
    order = int(order)
    if not (_MIN_ORDER <= order <= _MAX_ORDER):
        raise SpecError(f"jet order must be in [{_MIN_ORDER}, {_MAX_ORDER}]")
    n = model.dimension
    T = exponential_jets(model, x, order)
    C = _invert_series(T, order, n)
    full = [np.zeros(n)] + [C[m] for m in range(1, order + 1)]
    packed = {m: _pack(full[m], n, m) for m in range(order + 1)}
    if trust_radius is None:
        trust_radius = default_trust_radius(model, x)
    return DeformationJet(x, order, packed, trust_radius)


def _fit_design(n, degree):
    """Exponent vectors of all monomials with total degree <= degree."""
    alphas = []
    for total in range(degree + 1):
        for idx in itertools.combinations_with_replacement(range(n), total):
            alpha = [0] * n
            for i in idx:
                alpha[i] += 1
            alphas.append(tuple(alpha))
    return alphas


def _sample_velocities(n, radius, degree):
    if n == 1:
        r = np.linspace(-radius, radius, max(2 * degree + 3, 9))
        return r[:, None]
    if n == 2:
        radii = radius * np.array([0.3, 0.5, 0.7, 0.85, 1.0])
        n_angles = 2 * degree + 4
        angles = np.arange(n_angles) * (2.0 * np.pi / n_angles) + 0.1
        pts = [np.zeros(2)]
        for r in radii:
            for a in angles:
                pts.append(r * np.array([np.cos(a), np.sin(a)]))
        return np.array(pts)
    # shells of deterministic pseudo-random directions for n >= 3
    # (tensor lattices condition badly at high fit degrees); the shell
    # count must exceed half the degree or radial powers become confounded
    ncoef = len(_fit_design(n, degree))
    rng = np.random.default_rng(1729)
    dirs = rng.normal(size=(ncoef, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * np.linspace(0.25, 1.0, max(6, degree // 2 + 2))
    pts = [np.zeros(n)]
    for r in radii:
        pts.extend(r * d for d in dirs)
    return np.array(pts)


def jet_from_log_samples(model, x, order, *, fit_degree=None, sample_radius=None,
                         steps=200, trust_radius=None):
    """Independent jet oracle: sample the exponential map, fit its inverse.

    Shoots a centered stencil of geodesics from ``x``, pairs each initial
    velocity with the chart displacement it produces, and least-squares
    fits velocity as a polynomial in displacement.  The fit degree
    exceeds the requested order so that truncation bias stays below the
    comparison tolerances.
    """
    x = model.require_point(x)
    n = model.dimension
    order = int(order)
    if not (_MIN_ORDER <= order <= _MAX_ORDER):
        raise SpecError(f"jet order must be in [{_MIN_ORDER}, {_MAX_ORDER}]")
    if fit_degree is None:
        fit_degree = order + 5 if order <= 4 else order + 2
    if trust_radius is None:
        trust_radius = default_trust_radius(model, x)
    if sample_radius is None:
        sample_radius = 0.5 * trust_radius
    if not np.isfinite(sample_radius):
        sample_radius = 1.0

    taus = _sample_velocities(n, sample_radius, fit_degree)
    X0 = np.broadcast_to(x, taus.shape)
    ends, _, finite = kernels.integrate_batch(model, X0, taus, 1.0, steps)
    ok = finite & np.array([model.inside(p) for p in ends])
    if ok.sum() < len(_fit_design(n, fit_degree)):
        raise IllConditionedFitError(
            f"only {int(ok.sum())} usable samples for a degree-{fit_degree} fit"
        )
    disp = ends[ok] - x
    target = taus[ok]

    alphas = _fit_design(n, fit_degree)
    scaled = disp / sample_radius
    A = np.empty((len(disp), len(alphas)))
    for col, alpha in enumerate(alphas):
        column = np.ones(len(disp))
        for j, p in enumerate(alpha):
            if p:
                column = column * scaled[:, j] ** p
        A[:, col] = column
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0.0] = 1.0
    coef_eq, _, _, svals = np.linalg.lstsq(A / norms, target, rcond=None)
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
    if cond > _COND_LIMIT:
        raise IllConditionedFitError(f"design matrix condition number {cond:.3e}")
    coef = coef_eq / norms[:, None]

    packed = {}
    for m in range(order + 1):
        idxs = sorted_multi_indices(n, m)
        values = np.zeros((n, len(idxs)))
        packed[m] = (idxs, values)
    for col, alpha in enumerate(alphas):
        m = sum(alpha)
        if m > order:
            continue
        idx = tuple(i for i, p in enumerate(alpha) for _ in range(p))
        fact = 1.0
        for p in alpha:
            fact *= math.factorial(p)
        idxs, values = packed[m]
        values[:, idxs.index(idx)] = coef[col] * fact / sample_radius**m
    return DeformationJet(x, order, packed, trust_radius)


def rho_coefficients(model, x):
    """Third-jet curvature coefficients and their skew reconstruction.

    rho[m, l, k, s] = (R[m, l, k, s] + R[m, k, l, s]) / 3; its skew part
    in the last index pair must reproduce the curvature tensor that
    produced it (an exact algebraic identity, checked numerically).
    """
    from .manifold import CurvatureTensor, riemann

    R = riemann(model, x)
    comp = R.components
    rho = (comp + comp.swapaxes(1, 2)) / 3.0
    check = rho - rho.swapaxes(2, 3)
    return rho, CurvatureTensor(base=R.base, components=check)


def canonicity_residual(jet, model, t_disp, tau_prime):
    """Contracted defining residual |[H'' - Gamma(x+t) H'] tau' tau'|.

    Zero for the exact map; for a truncated jet it decays like
    |t|^(order-1).
    """
    t = np.asarray(t_disp, dtype=float)
    hess = jet.eval_hessian(t)
    lam = jet.eval_lambda(t)
    gamma = model.gamma(jet.base + t)
    bracket = hess - np.einsum("mn,nrs->mrs", lam, gamma)
    return float(np.max(np.abs(np.einsum("mrs,r,s->m", bracket, tau_prime, tau_prime))))
