"""Runtime switch between numba-jitted kernels and pure-numpy fallbacks.

Every hot loop in the package has two implementations that produce the same
numbers: a numba ``@njit`` kernel and a vectorised numpy path.  The active
path is chosen per call, so tests and benchmarks can compare both in one
process.  Set ``MICROSPOT_NO_NUMBA=1`` to force the numpy path globally
(useful on platforms where numba is unavailable or misbehaves).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

ENV_FLAG = "MICROSPOT_NO_NUMBA"

try:
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Stand-in decorator so kernel modules import cleanly without numba."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


_env_disabled = os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false")
_override: bool | None = None


def numba_enabled() -> bool:
    """True when jitted kernels should run; false selects the numpy fallback."""
    if not HAVE_NUMBA:
        return False
    if _override is not None:
        return _override
    return not _env_disabled


@contextmanager
def force_numpy():
    """Run the pure-numpy kernel path inside the context."""
    global _override
    previous = _override
    _override = False
    try:
        yield
    finally:
        _override = previous


@contextmanager
def force_numba():
    """Run the jitted kernel path inside the context (no-op without numba)."""
    global _override
    previous = _override
    _override = True if HAVE_NUMBA else False
    try:
        yield
    finally:
        _override = previous
