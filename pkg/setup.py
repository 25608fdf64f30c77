"""Build script: compiles the optional path-simulation kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure to build it is downgraded to a
warning.  Set FELLERLAB_NO_EXT=1 to skip the extension build entirely.
"""

import os
import warnings

from setuptools import setup


def _extensions():
    if os.environ.get("FELLERLAB_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"building without compiled kernels: {exc}")
        return []
    ext = Extension(
        "fellerlab._kernels._core",
        ["src/fellerlab/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps the C arithmetic bit-identical to the
        # numpy backend (no FMA contraction of a*b+c).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
