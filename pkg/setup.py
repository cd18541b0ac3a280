"""Builds the optional compiled residual kernel.

The package works without it (a numpy fallback is selected at import); any
failure here degrades to a pure-Python install.
"""

from setuptools import setup

kwargs = {}
try:
    import numpy
    from Cython.Build import cythonize

    kwargs["ext_modules"] = cythonize(
        ["src/sfcast/_kernels/_speedups.pyx"],
        compiler_directives={"language_level": 3},
    )
    kwargs["include_dirs"] = [numpy.get_include()]
except Exception as exc:  # pragma: no cover
    print(f"skipping compiled kernels: {exc}")

setup(**kwargs)
