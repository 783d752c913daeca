"""Backend selection for the compiled kernels.

Set ``TABULAR_OPE_DISABLE_NUMBA=1`` to force the pure-numpy path. When numba
is not importable the numpy path is used automatically.
"""

import os

_DISABLED = os.environ.get("TABULAR_OPE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if NUMBA_AVAILABLE:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"
