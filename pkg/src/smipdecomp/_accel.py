"""Numba availability switch.

Set ``SMIPDECOMP_NUMBA=0`` to force the pure-numpy kernels even when numba
is installed.  The flag is read once, at import time.
"""
import os
import warnings

_FLAG = os.environ.get("SMIPDECOMP_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _FLAG not in ("0", "false", "no", "off")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    if NUMBA_REQUESTED:
        warnings.warn("numba could not be imported; using numpy kernels")

USE_NUMBA = HAVE_NUMBA and NUMBA_REQUESTED
