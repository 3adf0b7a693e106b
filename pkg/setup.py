"""Build script: compiles the optional fast integrator kernel.

The package is fully functional without the extension (a pure-Python
twin is selected at import time); the build is therefore marked
optional so that environments without a C toolchain still install.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "transportlab.kernels._native",
        sources=["src/transportlab/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
