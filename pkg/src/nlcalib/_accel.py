"""Backend selection for the hot loops.

Numba is used when importable unless ``NLCALIB_PURE_NUMPY`` is set to a
truthy value, in which case every kernel in :mod:`nlcalib._hot` falls back
to its vectorized numpy twin.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("NLCALIB_PURE_NUMPY", "").strip().lower() in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
