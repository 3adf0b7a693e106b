"""Central finite differences with Richardson refinement.

All stencils are 4th-order accurate.  Mixed partials use tensor
products of one-dimensional stencils; repeated evaluation points are
cached per call.  Step sizes follow the rule h_j = max(1e-3, 1e-2*|x_j|)
unless the caller overrides them, and Richardson extrapolation (one
halving, eliminating the h^4 term) is applied for derivative orders >= 2.
"""

from __future__ import annotations

import functools
import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import DomainError

MAX_DERIV_ORDER = 6
DOMAIN_MARGIN_STEPS = 5.0


def _solve_exact(matrix, rhs):
    """Gaussian elimination over Fractions (stencil weights must be exact:
    float weights would poison high-order derivatives after the 1/h^m
    scaling)."""
    n = len(rhs)
    A = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[pivot] = A[pivot], A[col]
        inv = Fraction(1, 1) / A[col][col]
        A[col] = [v * inv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                factor = A[r][col]
                A[r] = [a - factor * b for a, b in zip(A[r], A[col])]
    return [A[r][n] for r in range(n)]


@functools.lru_cache(maxsize=None)
def _stencil(m):
    """Symmetric central stencil for the m-th derivative, 4th-order accurate.

    Smallest symmetric stencil with truncation order >= 4: half-width
    k = ceil((m + 2) / 2); weights solve the moment conditions
    sum_j w_j o_j^t = m! delta_{t m} for t = 0..2k, exactly.
    """
    if m == 0:
        return (0,), (1.0,)
    k = (m + 3) // 2 if m % 2 else (m + 2) // 2
    offsets = list(range(-k, k + 1))
    rows = [[Fraction(o) ** t for o in offsets] for t in range(2 * k + 1)]
    rhs = [Fraction(math.factorial(m)) if t == m else Fraction(0)
           for t in range(2 * k + 1)]
    weights = _solve_exact(rows, rhs)
    keep = [(o, float(w)) for o, w in zip(offsets, weights) if w != 0]
    return tuple(o for o, _ in keep), tuple(w for _, w in keep)


def spec_step(x):
    """Default per-coordinate步 step: max(1e-3, 1e-2*|x_j|)."""
    x = np.asarray(x, dtype=float)
    return np.maximum(1e-3, 1e-2 * np.abs(x))


def stencil_extent(counts):
    """Largest |offset| (in steps) used by the tensor stencil for ``counts``."""
    return max(max(abs(o) for o in _stencil(c)[0]) for c in counts)


def check_margin(inside, x, halfwidth):
    """Require the box x +- halfwidth to satisfy ``inside`` at all corners.

    ``halfwidth`` is a per-coordinate vector.  Raises DomainError when a
    corner fails, which keeps one-sided stencil bias from going unnoticed.
    """
    if inside is None:
        return
    x = np.asarray(x, dtype=float)
    halfwidth = np.broadcast_to(np.asarray(halfwidth, dtype=float), x.shape)
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=x.size):
        corner = x + np.array(signs) * halfwidth
        if not inside(corner):
            raise DomainError(
                f"finite-difference stencil around {x.tolist()} leaves the domain "
                f"(margin {halfwidth.tolist()})"
            )


def _tensor_stencil(counts, denominators):
    """Tensor product of 1-D stencils.

    Yields (offset_vector_in_half_steps, weight) pairs: offsets are integer
    multiples of h/2 so that the h and h/2 grids share exact keys.
    ``denominators`` is 2 for the base grid (offsets scaled by 2) or 1 for
    the halved grid.
    """
    axes = []
    for c in counts:
        offs, wts = _stencil(c)
        axes.append([(o * denominators, w) for o, w in zip(offs, wts)])
    for combo in itertools.product(*axes):
        offset = tuple(o for o, _ in combo)
        weight = 1.0
        for _, w in combo:
            weight *= w
        yield offset, weight


def _apply_stencil(f, x, h, counts, grid_scale, cache):
    x = np.asarray(x, dtype=float)
    total = None
    scale = 1.0
    for axis, c in enumerate(counts):
        scale *= (h[axis] * grid_scale) ** c
    for offset, weight in _tensor_stencil(counts, denominators=2 * grid_scale):
        if offset in cache:
            value = cache[offset]
        else:
            point = x + 0.5 * np.array(offset, dtype=float) * h
            value = np.asarray(f(point), dtype=float)
            cache[offset] = value
        term = weight * value
        total = term if total is None else total + term
    return total / scale


def partial(f, x, counts, h=None, richardson=False, inside=None, cache=None):
    """Mixed partial derivative of ``f`` at ``x``.

    ``counts`` gives the derivative order per coordinate, e.g. (2, 1) for
    d^3/dx0^2 dx1.  ``f`` may return a scalar or an ndarray; the result has
    the same shape.  Richardson extrapolation evaluates the stencil at h
    and h/2 and removes the leading error term.
    """
    x = np.asarray(x, dtype=float)
    counts = tuple(int(c) for c in counts)
    if any(c < 0 or c > MAX_DERIV_ORDER for c in counts):
        raise ValueError(f"unsupported derivative counts {counts}")
    if h is None:
        h = spec_step(x)
    else:
        h = np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()
    extent = stencil_extent(counts) if any(counts) else 0
    check_margin(inside, x, (extent + DOMAIN_MARGIN_STEPS) * h)
    if cache is None:
        cache = {}
    coarse = _apply_stencil(f, x, h, counts, grid_scale=1, cache=cache)
    if not richardson:
        return coarse
    fine = _apply_stencil(f, x, h, counts, grid_scale=0.5, cache=cache)
    return (16.0 * fine - coarse) / 15.0


def derivative_stack(f, x, max_order, h=None, inside=None, richardson_from=1):
    """Full symmetric derivative tensors of ``f`` up to ``max_order``.

    Returns [f(x), D1, D2, ...] where Dk has shape f.shape + (n,)*k and is
    exactly symmetric in its derivative axes (filled from sorted
    multi-indices).  A shared evaluation cache keeps the cost of the
    higher tensors down.  Richardson refinement applies at every order by
    default; the step-halving grid shares points with the base grid, so
    the marginal cost is modest.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_order > MAX_DERIV_ORDER:
        raise ValueError(f"derivative order {max_order} not supported")
    base = np.asarray(f(x), dtype=float)
    stack = [base]
    cache = {(0,) * n: base}
    for order in range(1, max_order + 1):
        tensor = np.zeros(base.shape + (n,) * order)
        for alpha in itertools.combinations_with_replacement(range(n), order):
            counts = [0] * n
            for a in alpha:
                counts[a] += 1
            if max(counts) > MAX_DERIV_ORDER:
                raise ValueError(
                    f"axis derivative count {max(counts)} exceeds stencil table"
                )
            value = partial(
                f,
                x,
                counts,
                h=h,
                richardson=order >= richardson_from,
                inside=inside,
                cache=cache,
            )
            for perm in set(itertools.permutations(alpha)):
                tensor[(Ellipsis,) + perm] = value
        stack.append(tensor)
    return stack


def fit_loglog_slope(sizes, values, floor=1e-300):
    """Least-squares slope of log(values) against log(sizes).

    Values at or near the floor count as numerical zeros: when fewer
    than 3 points rise above it, the data is flat at the noise floor and
    the slope is reported as inf.  A genuinely under-sized ladder raises
    ValueError (degenerate fit).
    """
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(sizes) < 3:
        raise ValueError("fewer than 3 ladder points for a log-log fit")
    keep = values > floor
    if keep.sum() < 3:
        if np.max(values) <= 1e3 * floor:
            return math.inf
        raise ValueError("fewer than 3 usable ladder points for a log-log fit")
    slope = np.polyfit(np.log(sizes[keep]), np.log(values[keep]), 1)[0]
    return float(slope)
