"""Optional numba acceleration.

Set ``STATVAR_NUMBA=0`` to run the pure-numpy kernels instead of the
njit-compiled loop kernels.  Without numba installed the numpy path is used.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_REQUESTED = os.environ.get("STATVAR_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")
USING_NUMBA = NUMBA_REQUESTED and numba is not None


def maybe_njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)
