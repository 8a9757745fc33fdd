"""Backend selection for the compiled kernels.

Set ``MASKFIT_NO_NUMBA=1`` to force the pure numpy/python fallbacks (useful
for debugging and for platforms without numba).
"""
import os

_flag = os.environ.get("MASKFIT_NO_NUMBA", "").strip().lower()
USE_NUMBA = _flag not in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def pick(numba_impl, numpy_impl):
    """Return the implementation for the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl
