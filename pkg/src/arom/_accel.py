"""Optional numba acceleration.

The hot loops in :mod:`arom.kernels` exist twice: a numba ``@njit`` version
and a pure-numpy version.  Which one is used is decided once at import time:

* ``AROM_NUMBA=0`` (or ``false``/``off``/``no``) forces the numpy path;
* otherwise numba is used when it can be imported.
"""

from __future__ import annotations

import os

_OFF = {"0", "false", "off", "no"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("AROM_NUMBA", "1").strip().lower() not in _OFF


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n: int) -> None:
    """Thread count for numba parallel regions (the kernels here are serial per call)."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if HAVE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
