"""Build script: compiles the optional kernel extension when Cython and a C
compiler are available, otherwise installs the pure-Python fallback only."""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to the pure-Python kernels instead of failing the install."""

    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:  # compiler missing, broken toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        sys.stderr.write(
            "\n*** fpgraph: compiled kernels unavailable (%s); "
            "falling back to the pure-Python implementation. ***\n\n" % (exc,)
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "fpgraph._kernels",
        ["src/fpgraph/_kernels.pyx"],
        # -ffp-contract=off keeps results bit-identical to the Python fallback
        # (no FMA contraction of a*b+c).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
