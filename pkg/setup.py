"""Builds the optional compiled kernels; the package works without them."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [
            Extension(
                "dqnfraud._kernels",
                ["src/dqnfraud/_kernels.pyx"],
                # no fast-math or FMA contraction: results must match the numpy fallback bit for bit;
                # -fno-math-errno only lets sqrt vectorize, IEEE results are unchanged
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-math-errno"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
