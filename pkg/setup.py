"""Builds the optional compiled convolution kernels.

The package works without them (a pure numpy fallback is selected at
import time), so a missing compiler or Cython only costs speed.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "litevsr.backend._ckernels",
                ["src/litevsr/backend/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    if os.environ.get("LITE_VSR_REQUIRE_EXT"):
        raise

setup(ext_modules=ext_modules)
