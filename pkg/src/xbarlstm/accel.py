"""Numba on/off switch for the hot kernels.

Set ``XBARLSTM_NO_NUMBA=1`` (or if numba is not importable) to select the
pure-numpy fallback implementations in :mod:`xbarlstm.kernels`. The loop
kernels stay importable either way; without numba the ``njit`` decorator
below is a no-op so they run as plain Python.
"""

import os


def _numba_disabled():
    return os.environ.get("XBARLSTM_NO_NUMBA", "0").strip().lower() in {"1", "true", "yes"}


USE_NUMBA = not _numba_disabled()

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:
        USE_NUMBA = False

if not USE_NUMBA:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap
