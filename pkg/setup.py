"""Build the compiled kernels when Cython and a C compiler are available.

Without them the package installs pure Python and ``locdyn.kernels`` falls
back to the numpy implementation at import.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler
            print(f"warning: compiled kernels not built ({exc}); using the numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); using the numpy fallback")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "locdyn._ckernels",
        ["src/locdyn/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # no FMA contraction or reassociation: results must match the numpy fallback bit for bit
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
