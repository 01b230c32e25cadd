"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy fallback is used. ``HRIAD_BACKEND=numpy`` forces the fallback and
``HRIAD_BACKEND=cython`` makes a missing extension a hard error (useful in
benchmarks and CI).
"""

import os

_requested = os.environ.get("HRIAD_BACKEND", "auto").strip().lower()

if _requested in ("numpy", "python"):
    from . import _kernels_py as K

    COMPILED = False
elif _requested in ("auto", "", "cython", "compiled"):
    try:
        from . import _kernels as K  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        if _requested in ("cython", "compiled"):
            raise
        from . import _kernels_py as K  # type: ignore[no-redef]

        COMPILED = False
else:
    raise ImportError(f"unknown HRIAD_BACKEND value: {_requested!r}")


def backend_name() -> str:
    return K.BACKEND
