import os

import numpy as np
from setuptools import Extension, setup

# MLQMC_NO_EXT=1 builds a pure-Python install; the package then runs on its numpy fallback.
if os.environ.get("MLQMC_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mlqmc._core",
                ["src/mlqmc/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
