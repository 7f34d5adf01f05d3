"""Build script for the optional compiled Bloch time-stepping kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it speeds up the Bloch experiments considerably.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "multibang.models._bloch_kernels",
                ["src/multibang/models/_bloch_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=extensions)
