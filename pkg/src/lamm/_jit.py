"""JIT backend selection.

Kernels are compiled with numba unless ``LAMM_DISABLE_NUMBA=1`` is set in the
environment (or numba is not importable), in which case the same source runs
as plain Python/numpy.
"""

import os

DISABLE_ENV = "LAMM_DISABLE_NUMBA"

_disabled = os.environ.get(DISABLE_ENV, "0").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None
BACKEND = "numba" if USE_NUMBA else "python"


def jit(func):
    """Compile ``func`` in nopython mode, or return it untouched on the fallback path."""
    if not USE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
