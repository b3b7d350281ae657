"""Build the optional compiled kernels.

The package works without them; ``neutralspec._backend`` falls back to the
numpy implementation when the extension is missing.
"""
import os

import numpy as np
from setuptools import setup

ext_modules = []
if not os.environ.get("NEUTRALSPEC_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("neutralspec._kernels", ["src/neutralspec/_kernels.pyx"],
                       include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
