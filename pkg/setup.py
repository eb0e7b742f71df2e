"""Build shim for the compiled training kernel.

The extension is plain Cython over C doubles; -ffast-math + -march=native let
the compiler use the vectorized libm (libmvec) for exp(), which is what makes
full-batch training over ~2*10^5 instances for 10^5 epochs tractable.
"""

import platform

from Cython.Build import cythonize
from setuptools import Extension, setup

if platform.system() == "Linux":
    compile_args = ["-O3", "-march=native", "-ffast-math"]
    link_args = ["-lmvec", "-lm"]
else:
    compile_args = ["-O3"]
    link_args = []

setup(
    ext_modules=cythonize(
        [
            Extension(
                "millab._trainkern",
                ["src/millab/_trainkern.pyx"],
                extra_compile_args=compile_args,
                extra_link_args=link_args,
            )
        ],
        language_level=3,
    )
)
