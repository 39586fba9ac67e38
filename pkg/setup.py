"""Build script for the optional compiled geometry kernels.

The package is pure Python plus one Cython extension holding the hot
point/box-to-boundary primitives.  The extension is optional: if the build
fails (no compiler, no Cython) the package falls back to the vectorized
NumPy kernels at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "divcurl._kernels._corecy",
        sources=["src/divcurl/_kernels/_corecy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
