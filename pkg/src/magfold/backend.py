"""Kernel backend selection.

Hot numeric kernels (chain energy and its finite-difference gradient) are
compiled with numba by default.  Setting the environment variable
``MAGFOLD_DISABLE_NUMBA=1`` before import selects the pure-numpy path, which
runs the identical source functions uncompiled.  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

DISABLE_FLAG = "MAGFOLD_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(DISABLE_FLAG, "").strip() not in ("1", "true", "yes")


NUMBA_ENABLED = False
if numba_requested():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def maybe_jit(func):
    """Apply ``numba.njit`` when the numba backend is active, else return func unchanged."""
    if NUMBA_ENABLED:
        import numba

        return numba.njit(cache=True)(func)
    return func
