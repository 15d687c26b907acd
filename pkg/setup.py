"""Optional compiled bandit kernel; the package falls back to pure Python if this fails."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DEALBENCH_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dealbench._kernels._bandit_c",
                    ["src/dealbench/_kernels/_bandit_c.pyx"],
                    include_dirs=[numpy.get_include()],
                    # no FMA contraction: results must match the pure-Python kernel bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
