import io
import math

import numpy as np
import pytest

from transportlab import (
    connect,
    deformation_jet,
    first_integral,
    flat,
    halfplane,
    polar_flat,
    shoot,
    sphere2,
)
from transportlab.errors import ConvergenceError, DomainError, SpecError
from transportlab.fd import fit_loglog_slope


def test_flat_straight_line():
    path = shoot(flat(2), [0.0, 0.0], [1.0, 2.0], 1.0, steps=64)
    assert np.allclose(path.end_point, [1.0, 2.0], atol=1e-14)
    assert np.allclose(path.end_tangent, [1.0, 2.0], atol=1e-14)


def test_sphere_equator():
    path = shoot(sphere2(1.0), [math.pi / 2, 0.0], [0.0, 1.0], 1.0, steps=128)
    assert np.allclose(path.end_point, [math.pi / 2, 1.0], atol=1e-12)
    assert np.allclose(path.end_tangent, [0.0, 1.0], atol=1e-12)


def test_halfplane_vertical_closed_form():
    # y(s) = e^s for unit upward velocity at (0, 1)
    path = shoot(halfplane(), [0.0, 1.0], [0.0, 1.0], 1.0, steps=512)
    assert abs(path.end_point[1] - math.e) < 1e-8
    assert abs(path.end_point[0]) < 1e-14


def test_shoot_validates_input():
    with pytest.raises(SpecError):
        shoot(flat(2), [0.0, 0.0], [1.0, 1.0], 1.0, steps=4)
    with pytest.raises(DomainError):
        shoot(halfplane(), [0.0, -1.0], [0.0, 1.0], 1.0)


def test_domain_exit_reports_parameter():
    # a meridian reaches the pole theta = pi at affine parameter pi/2
    with pytest.raises(DomainError) as err:
        shoot(sphere2(1.0), [math.pi / 2, 0.0], [1.0, 0.0], 2.0, steps=256)
    assert err.value.exit_s is not None
    assert 1.4 < err.value.exit_s < 1.7


def test_convergence_order_is_four():
    ladders = [16, 32, 64, 128]
    errs = []
    for steps in ladders:
        end = shoot(halfplane(), [0.0, 1.0], [0.0, 1.0], 1.0, steps=steps).end_point
        errs.append(abs(end[1] - math.e))
    slope = -fit_loglog_slope(ladders, errs)
    assert abs(slope - 4.0) < 0.1


@pytest.mark.parametrize("model,x,xp,expected,locality", [
    (flat(2), [0.0, 0.0], [3.0, 4.0], [3.0, 4.0], None),
    (halfplane(), [0.0, 1.0], [0.0, math.e], [0.0, 1.0], 3.0),
    (sphere2(1.0), [math.pi / 2, 0.0], [math.pi / 2, 0.5], [0.0, 0.5], None),
], ids=["flat", "halfplane", "sphere"])
def test_connect_closed_forms(model, x, xp, expected, locality):
    tau = connect(model, x, xp, locality=locality)
    assert np.max(np.abs(tau - np.array(expected))) < 1e-8


def test_connect_shoot_roundtrip():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.2, 0.1])
    tau = np.array([0.1, 0.17])
    end = shoot(model, x, tau, 1.0, steps=512).end_point
    back = connect(model, x, end)
    assert np.max(np.abs(back - tau)) < 1e-8


def test_connect_locality_guard():
    with pytest.raises(ConvergenceError):
        connect(halfplane(), [0.0, 1.0], [0.0, math.e])  # separation 1.72 > 0.5
    # explicit override reaches it
    tau = connect(halfplane(), [0.0, 1.0], [0.0, math.e], locality=2.0)
    assert np.max(np.abs(tau - np.array([0.0, 1.0]))) < 1e-8


def test_speed_conservation():
    for model, x, tau in [
        (sphere2(1.0), [math.pi / 2 - 0.3, 0.4], [0.12, 0.2]),
        (halfplane(), [0.0, 1.0], [0.1, 0.15]),
        (polar_flat(), [1.0, 0.5], [0.1, 0.12]),
    ]:
        path = shoot(model, x, tau, 1.0, steps=1000)
        speeds = [path.tau[i] @ model.metric(path.x[i]) @ path.tau[i]
                  for i in range(0, 1001, 100)]
        assert max(speeds) - min(speeds) < 1e-9, model.name


def test_first_integral_boundary_and_constancy():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    tau = np.array([0.1, 0.12])
    path = shoot(model, x, tau, 1.0, steps=1000)
    jet = deformation_jet(model, x, order=6)
    u0 = first_integral(model, path, 0.0, jet=jet)
    assert np.max(np.abs(u0 - tau)) < 1e-14  # value at the start is exact
    for s in (0.25, 0.5, 1.0):
        u = first_integral(model, path, s, jet=jet)
        assert np.max(np.abs(u - tau)) < 1e-6


def test_first_integral_flat_is_identity():
    model = flat(2)
    path = shoot(model, [0.0, 0.0], [0.3, 0.4], 1.0, steps=100)
    jet = deformation_jet(model, [0.0, 0.0], order=4)
    for s in (0.1, 0.7, 1.0):
        u = first_integral(model, path, s, jet=jet)
        assert np.max(np.abs(u - np.array([0.3, 0.4]))) < 1e-14


def test_path_csv_roundtrip():
    path = shoot(flat(2), [0.0, 0.0], [1.0, 2.0], 1.0, steps=8)
    buf = io.StringIO()
    path.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "s,x0,x1,tau0,tau1"
    assert len(lines) == 10
    last = [float(v) for v in lines[-1].split(",")]
    assert last == pytest.approx([1.0, 1.0, 2.0, 1.0, 2.0])
