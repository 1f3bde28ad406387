"""Kernel backend selection: numba-jitted hot loops with a pure-numpy fallback.

The accelerated path is used when numba imports cleanly and the environment
variable PERCONET_BACKEND is unset or set to "numba".  Setting
PERCONET_BACKEND=numpy forces the vectorized numpy/scipy fallback, which
produces identical results (labelings are canonicalized, float kernels follow
the same operation order).  The flag is read once at import time.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install dependency
    numba = None
    _HAVE_NUMBA = False

_requested = os.environ.get("PERCONET_BACKEND", "numba").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"PERCONET_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = _HAVE_NUMBA and _requested != "numpy"

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit_or_plain(func):
    """numba.njit(cache=True) under the accelerated backend, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(func, cache=True)
    return func
