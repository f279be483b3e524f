"""Build script: compiles the local-search/split kernel extension.

The package works without the extension (falling back to the pure-Python
engine), so a missing compiler or Cython only costs speed, not features.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython unavailable, building without compiled engine",
              file=sys.stderr)
        return []
    ext = Extension(
        "vroute.engine._ckernel",
        ["src/vroute/engine/_ckernel.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=extensions())
