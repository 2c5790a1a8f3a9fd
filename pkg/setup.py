"""Builds the optional compiled kernels.

Without Cython (or a C compiler) the package installs pure-Python and the
fallback kernels are used at import time.
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
                "gapgraph._kernels._boxqp",
                ["src/gapgraph/_kernels/_boxqp.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
