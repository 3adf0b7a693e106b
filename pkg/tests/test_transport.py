import math

import numpy as np
import pytest

from transportlab import (
    TransportMatrix,
    composition_defect,
    composition_residual,
    deformation_jet,
    discrepancy_scaling,
    finite_transport,
    flat,
    halfplane,
    metric_at,
    metric_compat_residual,
    ode_transport,
    polar_flat,
    radial_probe,
    shoot,
    sphere2,
)
from transportlab.errors import SpecError


def test_transport_matrix_validation():
    with pytest.raises(SpecError):
        TransportMatrix(np.zeros(2), np.zeros(2), np.zeros((2, 2)), "ode")
    with pytest.raises(SpecError):
        TransportMatrix(np.zeros(2), np.zeros(2),
                        np.array([[1.0, np.nan], [0.0, 1.0]]), "ode")


def test_ode_transport_flat_identity():
    path = shoot(flat(2), [0.0, 0.0], [0.5, 0.2], 1.0, steps=64)
    M = ode_transport(flat(2), path)
    assert np.allclose(M.matrix, np.eye(2), atol=1e-14)
    assert M.kind == "ode"


def test_ode_transport_equator_preserves_normal():
    model = sphere2(1.0)
    path = shoot(model, [math.pi / 2, 0.0], [0.0, 1.0], 1.0, steps=512)
    M = ode_transport(model, path)
    theta_dir = np.array([1.0, 0.0])
    assert np.max(np.abs(M.matrix @ theta_dir - theta_dir)) < 1e-8


def test_ode_transport_preserves_lengths():
    model = halfplane()
    path = shoot(model, [0.0, 1.0], [0.0, 1.0], 1.0, steps=512)
    M = ode_transport(model, path)
    g0, _ = metric_at(model, path.x[0])
    g1, _ = metric_at(model, path.end_point)
    for v in (np.array([1.0, 0.0]), np.array([0.3, -0.7])):
        pulled = M.matrix @ v
        assert abs(pulled @ g0 @ pulled - v @ g1 @ v) < 1e-8


def test_finite_transport_identity_cases():
    model = flat(2)
    jet = deformation_jet(model, [0.0, 0.0], order=4)
    theta = np.array([0.7, -0.2])
    assert np.allclose(finite_transport(jet, np.zeros(2), theta), theta)
    assert np.allclose(
        finite_transport(jet, np.array([0.3, 0.4]), theta), theta
    )


def test_radial_equivalence_catalog():
    cases = [
        (sphere2(1.0), [math.pi / 2 - 0.3, 0.4], [0.1, 0.12]),
        (halfplane(), [0.0, 1.0], [0.08, 0.1]),
        (polar_flat(), [1.0, 0.5], [0.1, 0.08]),
        (flat(2), [0.3, -0.2], [0.3, 0.4]),
    ]
    for model, x, tau in cases:
        t_disp, tau_p, path = radial_probe(model, x, np.array(tau), 1.0,
                                           steps=1000)
        jet = deformation_jet(model, x, order=8)
        fin = finite_transport(jet, t_disp, tau_p)
        ode = ode_transport(model, path).matrix @ tau_p
        assert np.max(np.abs(fin - np.array(tau))) < 1e-6, model.name
        assert np.max(np.abs(fin - ode)) < 1e-6, model.name


def test_composition_flat_and_identity_leg():
    assert composition_residual(flat(2), [0.0, 0.0], [0.4, 0.3], 0.5, 0.5) < 1e-12
    # a zero-length second leg composes exactly
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.2, 0.1])
    defect, info = composition_defect(model, x, np.array([0.1, 0.1]), 0.3, 1e-9)
    assert np.max(np.abs(defect)) < 1e-7


def test_composition_radial_and_scaling():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    tau = np.array([0.1, 0.12])
    residuals, sizes = [], []
    for s in (0.2, 0.4):
        defect, info = composition_defect(model, x, tau, s, s, order=8)
        sizes.append(s)
        residuals.append(np.max(np.abs(defect)))
        radial = np.max(np.abs(defect @ info["tau_second"]))
        assert radial < 1e-6, radial
    # full-matrix defect decays ~ quadratically: halving s gains ~4x
    ratio = residuals[1] / residuals[0]
    assert 2.5 < ratio < 6.0


def test_metric_compat_residuals():
    radial, full = metric_compat_residual(
        flat(2),
        deformation_jet(flat(2), [0.0, 0.0], order=4),
        np.array([0.5, 0.1]),
    )
    assert radial < 1e-12 and full < 1e-12

    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    jet = deformation_jet(model, x, order=6)
    tau = np.array([0.12, 0.2])
    fulls = []
    for s in (0.4, 0.8):
        t_disp, tau_p, _ = radial_probe(model, x, tau, s, steps=512)
        radial, full = metric_compat_residual(model, jet, t_disp, tau_prime=tau_p)
        assert radial < 1e-6
        fulls.append(full)
    assert fulls[1] / fulls[0] > 2.5  # ~ quadratic growth in separation


def test_discrepancy_flat_models_vanish():
    for model, x in ((flat(2), [0.1, 0.2]), (polar_flat(), [1.0, 0.5])):
        exponent, table = discrepancy_scaling(
            model, x, np.array([0.1, 0.08]), np.array([0.05, -0.07]),
            [0.2, 0.4, 0.7, 1.0], order=8, steps=256,
        )
        worst = max(d for _, d in table)
        tol = 1e-10 if model.name.startswith("flat") else 1e-8
        assert worst < tol, (model.name, worst)
        assert exponent == math.inf or exponent > 0


def test_discrepancy_sphere_quadratic():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    exponent, table = discrepancy_scaling(
        model, x, np.array([0.1, 0.12]), np.array([-0.08, 0.1]),
        [0.25, 0.4, 0.6, 1.0], steps=512,
    )
    assert exponent >= 1.85
    assert all(d > 0 for _, d in table)


def test_discrepancy_ladder_validation():
    with pytest.raises(SpecError):
        discrepancy_scaling(flat(2), [0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.5, 1.0])
