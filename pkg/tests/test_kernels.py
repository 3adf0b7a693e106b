import math

import numpy as np
import pytest

from transportlab import kernels, load_manifold
from transportlab.manifold import flat, halfplane, polar_flat, sphere2

MODELS = [flat(2), flat(3), polar_flat(), sphere2(1.0), halfplane()]
STARTS = {
    "flat2": ([0.1, -0.2], [0.4, 0.3]),
    "flat3": ([0.1, 0.2, 0.3], [0.2, -0.1, 0.15]),
    "polar_flat": ([1.0, 0.5], [0.1, 0.12]),
    "sphere2": ([math.pi / 2 - 0.3, 0.4], [0.12, 0.2]),
    "halfplane": ([0.0, 1.0], [0.1, 0.15]),
}

needs_native = pytest.mark.skipif(
    not kernels.HAVE_NATIVE, reason="compiled kernel not built"
)


@pytest.fixture(autouse=True)
def reset_backend():
    yield
    kernels.set_backend("auto")


def test_backend_reporting():
    model = sphere2(1.0)
    assert kernels.backend_for(model) in ("python", "native")
    kernels.set_backend("python")
    assert kernels.backend_for(model) == "python"
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@needs_native
@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_native_matches_python(model):
    x0, tau0 = STARTS[model.name]
    kernels.set_backend("python")
    xs_p, taus_p, M_p, nv_p = kernels.integrate(model, x0, tau0, 1.0, 200,
                                                with_transport=True)
    kernels.set_backend("native")
    xs_n, taus_n, M_n, nv_n = kernels.integrate(model, x0, tau0, 1.0, 200,
                                                with_transport=True)
    assert nv_p == nv_n == 201
    assert np.max(np.abs(xs_p - xs_n)) < 1e-13
    assert np.max(np.abs(taus_p - taus_n)) < 1e-13
    assert np.max(np.abs(M_p - M_n)) < 1e-13


@needs_native
def test_native_domain_exit_matches_python():
    model = sphere2(1.0)
    results = []
    for backend in ("python", "native"):
        kernels.set_backend(backend)
        _, _, _, nv = kernels.integrate(model, [math.pi / 2, 0.0], [1.0, 0.0],
                                        2.0, 100)
        results.append(nv)
    assert results[0] == results[1] < 101


def test_user_model_falls_back_to_python():
    spec = {"dimension": 2, "metric": [["1", "0"], ["0", "sin(x0)^2"]],
            "domain": "x0>0 && x0<pi"}
    model = load_manifold(spec)
    assert kernels.backend_for(model) == "python"
    if kernels.HAVE_NATIVE:
        kernels.set_backend("native")
        with pytest.raises(RuntimeError):
            kernels.backend_for(model)


def test_batch_matches_single():
    model = sphere2(1.0)
    x0, tau0 = STARTS[model.name]
    taus = np.array([tau0, [0.05, -0.1], [0.0, 0.15]])
    X0 = np.broadcast_to(np.array(x0), taus.shape)
    Xf, Tf, finite = kernels.integrate_batch(model, X0, taus, 1.0, 300)
    assert finite.all()
    for i in range(len(taus)):
        xs, ts, _, nv = kernels.integrate(model, x0, taus[i], 1.0, 300)
        assert nv == 301
        assert np.max(np.abs(xs[-1] - Xf[i])) < 1e-12
        assert np.max(np.abs(ts[-1] - Tf[i])) < 1e-12
