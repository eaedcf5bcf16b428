import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FEATHERWAVE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        extensions = [
            Extension(
                "featherwave._kernels",
                ["src/featherwave/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: replay must match the pure-Python path bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off", "-fopenmp"],
                extra_link_args=["-fopenmp"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
