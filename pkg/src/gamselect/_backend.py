"""Select the compiled kernel extension or the numpy fallback at import.

Override with the environment variable ``GAMSELECT_BACKEND``:

* ``auto`` (default): compiled extension if importable, else numpy;
* ``ext``: require the compiled extension (ImportError if missing);
* ``python``: force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_choice = os.environ.get("GAMSELECT_BACKEND", "auto").lower()

if _choice not in ("auto", "ext", "python"):
    raise ValueError(f"GAMSELECT_BACKEND must be auto|ext|python, got {_choice!r}")

if _choice == "python":
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]

        BACKEND = "ext"
    except ImportError:
        if _choice == "ext":
            raise
        kernels = _kernels_py
        BACKEND = "python"


def get_kernels(backend: str | None = None):
    """Kernel module for ``backend`` (None = the import-time choice)."""
    if backend is None:
        return kernels
    if backend == "python":
        return _kernels_py
    if backend == "ext":
        from . import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown backend {backend!r}")
