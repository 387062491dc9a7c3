"""Build the optional Cython kernels.

The package runs without them (``guiprobe.kernels`` falls back to numpy), so a
missing compiler or Cython install downgrades to a pure-Python build instead of
failing.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("GUIPROBE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "guiprobe.kernels._ckernels",
                    ["src/guiprobe/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # keep a*b+c unfused so results match the numpy fallback bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
