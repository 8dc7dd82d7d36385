"""Optional numba acceleration.

Hot loops are written once in a numba-compatible subset of numpy. When
``NMQ_DISABLE_NUMBA=1`` (or numba is missing) the decorator is the identity and
the same source runs as plain numpy, which keeps tracebacks readable and gives a
reference path for benchmarks.
"""
import os

_flag = os.environ.get("NMQ_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _numba_njit
    USE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba_njit = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True`` by default, or a no-op fallback."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def deco(fn):
        return fn

    return deco


def py_func(fn):
    """Return the interpreted version of a (possibly jitted) function."""
    return getattr(fn, "py_func", fn)
