"""Build script for the optional Cython round kernel.

The package works without the extension: msqkd.engine falls back to the
pure-Python twin in msqkd._engine_py, which produces bit-identical output.
-ffp-contract=off keeps the compiled arithmetic identical to CPython's
(no FMA contraction), which is what makes the twin guarantee testable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "msqkd._kernel",
                sources=["src/msqkd/_kernel.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
