"""Builds the optional compiled tree kernel.

The extension must be compiled with plain -O2: fused multiply-adds or
value-changing fast-math reorderings would break bit parity with the pure
Python backend, which the reproducibility guarantees depend on.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MATCOACH_NO_EXT") != "1" and os.path.exists("src/matcoach/forest/_build_cy.pyx"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "matcoach.forest._build_cy",
                    ["src/matcoach/forest/_build_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O2"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
