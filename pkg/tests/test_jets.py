import json
import math

import numpy as np
import pytest

from transportlab import (
    DeformationJet,
    canonicity_residual,
    christoffel,
    deformation_jet,
    flat,
    halfplane,
    jet_from_log_samples,
    polar_flat,
    radial_probe,
    rho_coefficients,
    riemann,
    sphere2,
)
from transportlab.errors import SpecError, TrustRadiusError
from transportlab.fd import fit_loglog_slope

CURVED = [
    (sphere2(1.0), np.array([math.pi / 2 - 0.3, 0.4])),
    (halfplane(), np.array([0.0, 1.0])),
    (polar_flat(), np.array([1.0, 0.5])),
]


def test_boundary_coefficients():
    for model, x in CURVED:
        jet = deformation_jet(model, x, order=4)
        n = model.dimension
        assert np.max(np.abs(jet.full(0))) == 0.0
        assert np.allclose(jet.full(1), np.eye(n))
        assert np.max(np.abs(jet.full(2) - christoffel(model, x).gamma)) < 1e-14


def test_flat_jet_is_identity_series():
    jet = deformation_jet(flat(2), [0.3, -0.2], order=6)
    for m in range(2, 7):
        assert np.max(np.abs(jet.full(m))) == 0.0
    t = np.array([0.4, -0.3])
    assert np.allclose(jet.eval_H(t, check_trust=False), t)
    assert np.allclose(jet.eval_lambda(t, check_trust=False), np.eye(2))


def test_halfplane_vertical_log_series():
    # vertical displacement u at base (0, 1) maps to velocity log(1 + u):
    # derivatives at zero are (-1)^(m+1) (m-1)!
    jet = deformation_jet(halfplane(), [0.0, 1.0], order=6)
    assert jet.coefficient(1, (1, 1)) == pytest.approx(-1.0, abs=1e-10)
    assert jet.coefficient(1, (1, 1, 1)) == pytest.approx(2.0, abs=1e-8)
    assert jet.coefficient(1, (1, 1, 1, 1)) == pytest.approx(-6.0, abs=1e-7)
    u = math.exp(0.2) - 1.0
    val = jet.eval_H([0.0, u])
    assert abs(val[1] - 0.2) < 1e-5
    assert abs(val[0]) < 1e-12


def test_halfplane_horizontal_fourth_jet():
    # geodesic to (u, 1) is a semicircle; the vertical velocity component
    # is 2 a tanh(a) with a = arcsinh(u/2), whose u^4 coefficient is -1/12,
    # hence the fourth derivative is -2
    jet = deformation_jet(halfplane(), [0.0, 1.0], order=4)
    assert jet.coefficient(1, (0, 0, 0, 0)) == pytest.approx(-2.0, abs=1e-8)


def test_third_jet_matches_connection_combination():
    # order-3 coefficients equal the symmetrized dGamma + Gamma.Gamma sum
    model = sphere2(1.0)
    x = np.array([1.1, 0.3])
    cc = christoffel(model, x, deriv_order=1)
    gamma, dgamma = cc.gamma, cc.derivs[0]
    term = dgamma.transpose(0, 2, 3, 1) + np.einsum(
        "msc,sab->mabc", gamma, gamma
    ).transpose(0, 3, 1, 2)
    sym = sum(
        term.transpose((0,) + p)
        for p in ((1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1), (3, 1, 2), (3, 2, 1))
    ) / 6.0
    jet = deformation_jet(model, x, order=3)
    assert np.max(np.abs(jet.full(3) - sym)) < 1e-8


@pytest.mark.parametrize("model,x", CURVED + [(flat(2), np.array([0.3, -0.2]))],
                         ids=["sphere", "halfplane", "polar", "flat"])
def test_oracle_agreement(model, x):
    for order in (3, 4):
        rec = deformation_jet(model, x, order=order)
        orc = jet_from_log_samples(model, x, order)
        for m in range(order + 1):
            gap = np.max(np.abs(rec.full(m) - orc.full(m)))
            assert gap < 1e-5, (model.name, order, m, gap)


def test_oracle_recovers_connection():
    model = halfplane()
    x = np.array([0.0, 1.0])
    orc = jet_from_log_samples(model, x, 4)
    assert np.max(np.abs(orc.full(2) - model.gamma(x))) < 1e-6


def test_eval_H_at_zero_and_trust():
    model = sphere2(1.0)
    jet = deformation_jet(model, [1.2, 0.3], order=4)
    assert np.max(np.abs(jet.eval_H(np.zeros(2)))) == 0.0
    assert np.allclose(jet.eval_lambda(np.zeros(2)), np.eye(2))
    too_far = np.array([2.0, 0.0])
    with pytest.raises(TrustRadiusError):
        jet.eval_H(too_far)
    with pytest.raises(TrustRadiusError):
        jet.eval_lambda(too_far)
    # explicit override bypasses the check
    jet.eval_H(too_far, check_trust=False)


def test_lambda_first_order_structure():
    # lambda(t) = I + Gamma t + O(t^2)
    model = halfplane()
    x = np.array([0.0, 1.0])
    jet = deformation_jet(model, x, order=6)
    gamma = model.gamma(x)
    t = 1e-4 * np.array([0.3, -0.7])
    lam = jet.eval_lambda(t)
    linear = np.eye(2) + np.einsum("man,a->mn", gamma, t)
    assert np.max(np.abs(lam - linear)) < 5e-8


def test_radial_identity_scaling():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    order = 4
    jet = deformation_jet(model, x, order=order)
    tau = np.array([0.12, 0.2])
    sizes, residuals = [], []
    for s in (0.2, 0.3, 0.45, 0.65):
        t_disp, _, _ = radial_probe(model, x, tau, s, steps=512)
        sizes.append(np.linalg.norm(t_disp))
        residuals.append(np.max(np.abs(jet.eval_H(t_disp) - s * tau)))
    slope = fit_loglog_slope(sizes, residuals)
    assert slope >= order + 1 - 0.5


def test_canonicity_residual_decay():
    model = halfplane()
    x = np.array([0.0, 1.0])
    order = 4
    jet = deformation_jet(model, x, order=order)
    tau = np.array([0.1, 0.15])
    sizes, residuals = [], []
    for s in (0.2, 0.3, 0.45, 0.65):
        t_disp, tau_p, _ = radial_probe(model, x, tau, s, steps=512)
        sizes.append(np.linalg.norm(t_disp))
        residuals.append(canonicity_residual(jet, model, t_disp, tau_p))
    slope = fit_loglog_slope(sizes, residuals)
    assert slope >= order - 1 - 0.5


def test_truncation_order_consistency():
    model = sphere2(1.0)
    x = np.array([math.pi / 2 - 0.3, 0.4])
    tau = np.array([0.12, 0.2])
    t_disp, tau_p, _ = radial_probe(model, x, tau, 0.8, steps=512)
    res = {}
    for order in (4, 6, 8):
        jet = deformation_jet(model, x, order=order)
        res[order] = canonicity_residual(jet, model, t_disp, tau_p)
    assert res[6] <= res[4] + 1e-11
    assert res[8] <= res[6] + 1e-11


def test_rho_identities():
    for model, x in CURVED:
        rho, R_check = rho_coefficients(model, x)
        R = riemann(model, x).components
        assert np.max(np.abs(R_check.components - R)) < 1e-6
        sym = sum(
            rho.transpose((0,) + p)
            for p in ((1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1), (3, 1, 2),
                      (3, 2, 1))
        ) / 6.0
        assert np.max(np.abs(sym)) < 1e-10
    rho, _ = rho_coefficients(flat(2), [0.1, 0.2])
    assert np.max(np.abs(rho)) == 0.0


def test_sphere_equator_rho_value():
    rho, R_check = rho_coefficients(sphere2(1.0), [math.pi / 2, 0.0])
    assert R_check.components[0, 1, 0, 1] == pytest.approx(1.0, abs=1e-6)


def test_golden_jet_dump():
    """Coefficient dump pinned byte-for-byte (regenerate after intentional
    changes by rewriting tests/golden/jet_halfplane_o4.json)."""
    import pathlib

    golden = pathlib.Path(__file__).parent / "golden" / "jet_halfplane_o4.json"
    jet = deformation_jet(halfplane(), [0.0, 1.0], order=4)
    assert jet.to_json() + "\n" == golden.read_text()


def test_json_roundtrip():
    model = halfplane()
    jet = deformation_jet(model, [0.0, 1.0], order=4)
    text = jet.to_json()
    data = json.loads(text)
    assert data["order"] == 4
    assert data["base"] == [0.0, 1.0]
    clone = DeformationJet.from_json(text)
    t = np.array([0.05, 0.08])
    assert np.allclose(clone.eval_H(t), jet.eval_H(t), atol=1e-15)
    assert np.allclose(clone.eval_lambda(t), jet.eval_lambda(t), atol=1e-15)


def test_order_bounds():
    with pytest.raises(SpecError):
        deformation_jet(flat(2), [0.0, 0.0], order=1)
    with pytest.raises(SpecError):
        deformation_jet(flat(2), [0.0, 0.0], order=9)
    with pytest.raises(SpecError):
        jet_from_log_samples(flat(2), [0.0, 0.0], 1)


def test_exp_log_consistency_on_catalog():
    from transportlab import eval_K, group_element

    for model, x in CURVED:
        jet = deformation_jet(model, x, order=6)
        trust = jet.trust_radius
        t = trust * np.array([0.6, 0.8])
        K = eval_K(model, x, group_element(model, x, t))
        err = np.max(np.abs(jet.eval_H(K, check_trust=False) - t))
        assert err < 1e-4, (model.name, err)
