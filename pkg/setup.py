"""Build the optional Cython kernels.

The extension is marked optional: if it cannot be compiled the package still
installs and falls back to the numpy implementation at import time.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

CFLAGS = ["-O3", "-fno-math-errno"]

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "storagesml._ckernels",
                ["src/storagesml/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=CFLAGS,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "nonecheck": False,
        },
    )

setup(ext_modules=ext_modules)
