"""Optional numba acceleration.

Set ``DTMM_DISABLE_JIT=1`` before import to run every kernel as plain
Python/numpy (same source, no compilation). Without numba installed the
fallback is used automatically.
"""

import os

_flag = os.environ.get("DTMM_DISABLE_JIT", "").strip().lower()
JIT_REQUESTED = _flag in ("", "0", "false", "no", "off")

try:
    if not JIT_REQUESTED:
        raise ImportError("disabled by DTMM_DISABLE_JIT")
    import numba

    JIT_ENABLED = True
except ImportError:
    numba = None
    JIT_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        return njit()(args[0])

    def wrap(fn):
        if JIT_ENABLED:
            kwargs.setdefault("cache", True)
            return numba.njit(**kwargs)(fn)
        return fn

    return wrap
