"""Numba switch.

Kernels are compiled with numba unless ``CIPHER_DISABLE_NUMBA`` is set to a
truthy value or numba cannot be imported, in which case the vectorized numpy
implementations in :mod:`cipher.kernels` are used instead.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("CIPHER_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` in nopython mode when numba is available.

    Compilation is attempted even when ``USE_NUMBA`` is false so that the
    benchmark can compare both paths in one process.
    """
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


__all__ = ["HAVE_NUMBA", "USE_NUMBA", "njit"]
