"""Build the optional Cython kernels; the package falls back to numpy if they fail."""
import os
import sys

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CABLEMON_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("cython not found, building pure-python only", file=sys.stderr)
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "cablemon._kernels",
                    ["src/cablemon/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
