"""Build script for the optional compiled kernel extension.

The package works without the extension (pure-Python kernels are selected
at import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

HERE = os.path.dirname(os.path.abspath(__file__))
PYX = os.path.join("src", "foodweight", "_kernels", "_cyops.pyx")
C_SOURCE = os.path.join("src", "foodweight", "_kernels", "_cyops.c")


def extension_modules():
    try:
        from Cython.Build import cythonize
    except ImportError:
        # Fall back to the pre-generated C file shipped with the sdist.
        if not os.path.exists(os.path.join(HERE, C_SOURCE)):
            return []
        return [Extension("foodweight._kernels._cyops", [C_SOURCE])]
    return cythonize(
        [Extension("foodweight._kernels._cyops", [PYX])],
        compiler_directives={"language_level": "3"},
    )


class OptionalBuildExt(build_ext):
    """Treat extension build failures as non-fatal."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing entirely
            warnings.warn(f"compiled kernels skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({ext.name}): {exc}")


setup(
    ext_modules=extension_modules(),
    cmdclass={"build_ext": OptionalBuildExt},
)
