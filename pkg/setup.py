"""Build script for the compiled propagation kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs anyway and falls back to the pure-Python backend at
import time.
"""

import os
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    # -ffp-contract=off keeps scalar C arithmetic bit-compatible with
    # NumPy's elementwise double ops (no fused multiply-add surprises).
    compile_args = ["-O3", "-fopenmp", "-ffp-contract=off"]
    link_args = ["-fopenmp"]
    if sys.platform == "darwin":
        compile_args = ["-O3", "-ffp-contract=off"]
        link_args = []

    ext_modules = cythonize(
        [
            Extension(
                "kinopax._kernel",
                ["src/kinopax/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=compile_args,
                extra_link_args=link_args,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    if os.environ.get("KINOPAX_REQUIRE_KERNEL"):
        raise
    sys.stderr.write(f"kinopax: building without compiled kernel ({exc})\n")

setup(ext_modules=ext_modules)
