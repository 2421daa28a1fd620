"""Build the optional compiled kernels; the package still works without them."""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("RRR_EKF_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("rrr_ekf._core", ["src/rrr_ekf/_core.pyx"], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
            quiet=True,
        )
    except Exception as exc:  # Cython missing or broken toolchain
        print(f"rrr_ekf: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
