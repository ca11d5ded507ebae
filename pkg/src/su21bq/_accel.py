"""Optional numba acceleration.

Set ``SU21BQ_DISABLE_NUMBA=1`` to run every kernel as plain numpy/Python.
When numba is missing the same fallback is used silently.
"""
import os

DISABLE_ENV = "SU21BQ_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false", "no")


try:
    if _disabled_by_env():
        raise ImportError("numba disabled by environment")
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Identity stand-in for ``numba.njit`` (bare or with options)."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap
