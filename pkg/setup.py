import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DGRAIN_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "darcygrain.kernels._impl",
                    ["src/darcygrain/kernels/_impl.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython/numpy at build time: install pure-python only, the
        # package falls back to the numpy kernel backend at import.
        ext_modules = []

setup(ext_modules=ext_modules)
