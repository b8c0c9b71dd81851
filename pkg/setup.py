"""Build the compiled kernel extension; metadata lives in pyproject.toml."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QQGP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install, kernels fall back at import
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("qqgp._ckernels", ["src/qqgp/_ckernels.pyx"],
                       extra_compile_args=["-O3"])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
