"""Integrator kernels with backend selection at import time.

The compiled extension (``_native``) carries closed-form connection
evaluations for the catalog models and is used automatically when it
imported cleanly and the model carries a kernel id.  Everything else —
user metrics, connection-only models, batch sampling — runs on the
pure-Python twin.  ``set_backend`` forces a choice, which the benchmark
and the cross-agreement tests rely on.
"""

from __future__ import annotations

from . import _python

try:
    from . import _native

    HAVE_NATIVE = True
except ImportError:  # extension not built; pure-Python twin takes over
    _native = None
    HAVE_NATIVE = False

_FORCED = "auto"


def set_backend(name):
    """Force 'python' or 'native', or restore 'auto'."""
    global _FORCED
    if name not in ("auto", "python", "native"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "native" and not HAVE_NATIVE:
        raise RuntimeError("native kernel extension is not available")
    _FORCED = name


def available_backends():
    return ("python", "native") if HAVE_NATIVE else ("python",)


def backend_for(model):
    """Name of the backend that will integrate this model."""
    if _FORCED == "python":
        return "python"
    native_ok = (HAVE_NATIVE and model.kernel_kind is not None
                 and model.dimension <= 8)
    if _FORCED == "native":
        if not native_ok:
            raise RuntimeError(f"model {model.name} has no native kernel")
        return "native"
    return "native" if native_ok else "python"


def integrate(model, x0, tau0, T, steps, with_transport=False):
    """Dispatch a single-trajectory integration; see _python.integrate."""
    if backend_for(model) == "native":
        return _native.integrate(
            model.kernel_kind,
            model.kernel_params,
            x0,
            tau0,
            float(T),
            int(steps),
            bool(with_transport),
        )
    return _python.integrate(model, x0, tau0, float(T), int(steps), with_transport)


def integrate_batch(model, X0, Tau0, T, steps):
    """Vectorized endpoint integration (always the numpy path)."""
    return _python.integrate_batch(model, X0, Tau0, float(T), int(steps))
