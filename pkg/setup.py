"""Build script: compiles the optional sampling-kernel extension.

The package works without the extension (a pure-Python twin is selected at
import time), so a missing Cython toolchain only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("feedback_market._step_kernel", ["src/feedback_market/_step_kernel.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
