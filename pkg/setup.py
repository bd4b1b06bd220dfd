"""Build script: compiles the optional bit-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so compilation failures are non-fatal by design: build with
``LAGMINE_REQUIRE_EXT=1`` to turn a missing compiler into a hard error.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "lagmine._kernels",
                ["src/lagmine/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    if os.environ.get("LAGMINE_REQUIRE_EXT"):
        raise

setup(ext_modules=ext_modules)
