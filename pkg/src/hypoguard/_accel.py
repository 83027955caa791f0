"""Numba acceleration switch.

Hot numeric kernels are written once, in nopython-compatible style, and
wrapped with :func:`maybe_njit`. Setting the environment variable
``HYPOGUARD_NUMBA=0`` (before import) selects the pure-Python/NumPy
fallback; the flag also falls back automatically if numba is missing.
Kernels are compiled without ``fastmath`` so the JIT path and the
fallback path produce bit-identical IEEE-754 results.
"""

import os

NUMBA_ENV_VAR = "HYPOGUARD_NUMBA"

_FALSE_VALUES = {"0", "false", "no", "off"}


def numba_requested() -> bool:
    """True unless HYPOGUARD_NUMBA is set to a false-y value."""
    return os.environ.get(NUMBA_ENV_VAR, "1").strip().lower() not in _FALSE_VALUES


def _resolve() -> bool:
    if not numba_requested():
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve()

if NUMBA_ENABLED:
    from numba import njit as _njit

    def maybe_njit(func):
        return _njit(cache=True, nogil=True)(func)

else:

    def maybe_njit(func):
        return func
