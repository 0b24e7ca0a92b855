"""Build script for the optional compiled dose kernel.

The package is fully functional without compilation (an ndarray fallback is
selected at import time). To build the fast kernel in place:

    python setup.py build_ext --inplace

Requires Cython and a C compiler; if either is missing the build is skipped
and the pure-Python backend is used.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "spdt._kernel._exposure_cy",
                ["src/spdt/_kernel/_exposure_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
