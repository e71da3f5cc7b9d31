"""Build the optional compiled chart kernels.

If Cython or a C compiler is unavailable the package still installs and the
numpy kernels are used instead.
"""

import os

from setuptools import setup


def extensions():
    if os.environ.get("PCFGBOUND_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "pcfgbound._kernels._ckernels",
        ["src/pcfgbound/_kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
