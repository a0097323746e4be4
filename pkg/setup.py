import os

from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: if Cython (or a
# C toolchain) is unavailable the package installs anyway and the NumPy
# fallback backend is selected at import time.
ext_modules = []
if not os.environ.get("DOOBKIT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "doobkit._kernels._ext",
                    ["src/doobkit/_kernels/_ext.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
