import math

import numpy as np
import pytest

from transportlab import (
    action_value,
    flat,
    gradient_relation_residual,
    halfplane,
    hj_residual,
    polar_flat,
    shoot,
    sphere2,
)
from transportlab.errors import ConvergenceError


def test_action_trivial_and_closed_forms():
    model = flat(2)
    assert action_value(model, [0.2, 0.1], [0.2, 0.1]) == pytest.approx(0.0, abs=1e-14)
    # half the squared Euclidean distance
    assert action_value(model, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(12.5, abs=1e-10)
    # unit-speed vertical geodesic over affine interval 1
    S = action_value(halfplane(), [0.0, 1.0], [0.0, math.e], locality=3.0)
    assert S == pytest.approx(0.5, abs=1e-8)


def test_action_symmetry_and_scaling():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    tau = np.array([0.12, 0.2])
    end = shoot(model, x, tau, 1.0, steps=512).end_point
    S_fwd = action_value(model, x, end)
    S_bwd = action_value(model, end, x)
    assert abs(S_fwd - S_bwd) < 1e-8
    half = shoot(model, x, 0.5 * tau, 1.0, steps=512).end_point
    S_half = action_value(model, x, half)
    assert abs(S_half - 0.25 * S_fwd) < 1e-8


def test_hj_flat_example():
    # |grad' S|^2 = 25 = |tau|^2 for the (3,4) separation
    res = hj_residual(flat(2), [0.0, 0.0], [3.0, 4.0])
    assert res < 1e-8


@pytest.mark.parametrize("model,x,xp_dir,loc", [
    (halfplane(), [0.0, 1.0], [0.05, 0.12], None),
    (sphere2(1.0), [math.pi / 2 - 0.3, 0.4], [0.2, 0.12], None),
    (polar_flat(), [1.0, 0.5], [0.12, 0.1], None),
], ids=["halfplane", "sphere", "polar"])
def test_hj_residual_catalog(model, x, xp_dir, loc):
    xp = np.array(x) + np.array(xp_dir)
    assert hj_residual(model, x, xp, locality=loc) < 1e-5


def test_hj_sphere_equator_half_separation():
    model = sphere2(1.0)
    x = np.array([math.pi / 2, 0.0])
    xp = np.array([math.pi / 2, 0.5])
    assert hj_residual(model, x, xp) < 1e-5


def test_gradient_relation_flat_exact():
    assert gradient_relation_residual(flat(2), [0.0, 0.0], [0.4, 0.3]) < 1e-8


def test_gradient_relation_decays():
    model = halfplane()
    x = np.array([0.0, 1.0])
    residuals = []
    for sep in (0.1, 0.2):
        xp = x + sep * np.array([0.5, 0.8])
        residuals.append(gradient_relation_residual(model, x, xp))
    assert residuals[0] < 1e-5
    assert residuals[1] < 4e-5
    assert residuals[1] > residuals[0]


def test_action_requires_reachable_target():
    with pytest.raises(ConvergenceError):
        action_value(halfplane(), [0.0, 1.0], [0.0, 2.9])  # beyond locality
