"""Build script for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the two hot
loops (multi-server FIFO service and non-dominated sorting).  If Cython or
a C compiler is unavailable the extension is skipped and the package falls
back to the pure-Python kernels at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PORTSLOT_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "portslot._ckernels",
                    ["src/portslot/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
