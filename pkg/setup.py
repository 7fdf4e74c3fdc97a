import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GETUP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "getup.kernels._ckernels",
                    ["src/getup/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython: the numpy fallback is used at runtime
        ext_modules = []

setup(ext_modules=ext_modules)
