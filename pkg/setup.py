"""Build script: compiles the optional CRF kernel extension.

The package works without the extension (a pure NumPy fallback is selected
at import time), so a failed compile only costs speed, not functionality.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/reviewkg/ner/kernels/_speedups.pyx"],
        language_level=3,
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
