"""Build hooks for the optional compiled kernel extension.

The package is fully functional without the extension: fpvbench.kernels
falls back to the numpy implementation when fpvbench._kernels is absent.
Building the extension requires Cython and a C compiler; any failure
downgrades to a warning instead of aborting the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available, skipping compiled kernels")
        return []
    from setuptools import Extension

    # -ffp-contract=off: no FMA contraction, so per-element results stay
    # bit-identical to the numpy fallback.
    ext = Extension(
        "fpvbench._kernels",
        ["src/fpvbench/_kernels.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


class optional_build_ext(build_ext):
    """Never fail the install over the optional extension."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"compiled kernels skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped: {exc}")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
