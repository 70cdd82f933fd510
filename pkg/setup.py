"""Build the optional compiled RK4 kernel.

The package works without it: ``safectl.dynamics.kernels`` falls back to the
pure-Python implementation when the extension cannot be imported.
"""

import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("SAFECTL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("Cython not available; installing pure-Python kernels only", file=sys.stderr)
    else:
        # no FMA contraction: keeps results bit-identical to the Python fallback
        flags = ["-O2", "-ffp-contract=off", "-fno-fast-math"]
        ext_modules = cythonize(
            [Extension("safectl.dynamics._rk4", ["src/safectl/dynamics/_rk4.pyx"], extra_compile_args=flags)],
            language_level=3,
        )

setup(ext_modules=ext_modules)
