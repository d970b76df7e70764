"""numba toggle.

Set ``LAYERED_PAGING_DISABLE_NUMBA=1`` (or run without numba installed) to use
the pure-numpy paths. The choice is fixed at import time.
"""
import os

_DISABLED = os.environ.get("LAYERED_PAGING_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def njit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise.

    The undecorated function stays reachable as ``.py_func`` either way.
    """
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    func.py_func = func
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
