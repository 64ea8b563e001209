"""Builds the optional compiled distance kernel.

The package works without it: hdlrag._kernels falls back to the NumPy
implementation when the extension is missing.
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hdlrag._kernels._l2",
                ["src/hdlrag/_kernels/_l2.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
