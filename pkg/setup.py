"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import); building it just makes the per-sweep loops faster.  Compilation
failures are therefore non-fatal.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("GAMSELECT_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "gamselect._kernels_cy",
                    ["src/gamselect/_kernels_cy.pyx"],
                    include_dirs=[np.get_include()],
                    # -ffp-contract=off: keep FMA contraction from changing
                    # rounding, so the compiled kernels match the numpy
                    # fallback bit for bit.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"gamselect: skipping Cython extension build ({exc})")

setup(ext_modules=ext_modules)
