"""Build script for the compiled cost kernel.

The package works without the extension (a numpy fallback is selected at
import time), so compilation failures are non-fatal: set
HEADANNEAL_SKIP_EXT=1 to force a pure-Python install.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("HEADANNEAL_SKIP_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "headanneal.kernels._fused",
        sources=["src/headanneal/kernels/_fused.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
