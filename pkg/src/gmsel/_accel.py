"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of Python and
numpy. When numba is importable and ``GMSEL_DISABLE_NUMBA`` is unset (or
``0``), they are compiled with ``numba.njit``; otherwise the same source
runs as plain Python, and callers switch to their vectorized numpy
forms.
"""

import os

_flag = os.environ.get("GMSEL_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def jit(func):
    """Compile ``func`` in nopython mode when numba is enabled."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
