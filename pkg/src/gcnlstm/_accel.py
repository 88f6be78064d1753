"""Numba shim.

Set ``GCNLSTM_DISABLE_NUMBA=1`` to force the pure-numpy kernels; the flag is
read once at import. Without numba installed the numpy path is used as well.
"""
import os

_DISABLED = os.environ.get("GCNLSTM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and not _DISABLED
