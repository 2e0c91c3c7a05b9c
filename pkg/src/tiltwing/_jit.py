"""Optional numba acceleration.

Kernels are written once as plain loops. When numba is importable and the
``TILTWING_NUMBA`` environment variable is not set to ``0``, the loop versions
are compiled with ``@njit``; otherwise each kernel module falls back to a
pure-numpy path.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("TILTWING_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(fn):
    """Compile ``fn`` with numba if available, else return it unchanged."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True)(fn)
