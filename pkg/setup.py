"""Build script: compiles the pairwise-kernel extension when Cython and a C
compiler are available.  The package works without it (numpy fallback is
selected at import time), so any build failure here is non-fatal."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "singmix._pairwise",
                ["src/singmix/_pairwise.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover
    print(f"singmix: skipping compiled extension ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
