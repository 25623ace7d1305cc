"""Numba switch.

Set ``SRFLOWS_NO_NUMBA=1`` to run every kernel as plain numpy/Python. The
kernels are written in the numba-compatible subset so both paths execute the
same source.
"""
import os

_DISABLED = os.environ.get("SRFLOWS_NO_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(fn):
    if HAS_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def pyfunc(fn):
    """Return the interpreted version of a (possibly) jitted function."""
    return getattr(fn, "py_func", fn)
