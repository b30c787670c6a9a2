"""Build script for the optional compiled kernels.

The package works without a compiler: if the extension cannot be built or
imported, `qcoarse._kernels` falls back to the pure-Python implementations.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QCOARSE_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "qcoarse._kernels._core",
                    ["src/qcoarse/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
