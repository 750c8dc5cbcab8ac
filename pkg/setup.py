import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "topicrefine.gnn._kernels",
                ["src/topicrefine/gnn/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Pure-numpy fallback is selected at import time when the extension
    # is unavailable.
    extensions = []

setup(ext_modules=extensions)
