"""Optional numba acceleration.

Hot kernels come in two flavours: an explicit-loop version compiled with
numba, and a vectorised numpy version. ``BILIPEXT_DISABLE_NUMBA=1`` forces the
numpy flavour even when numba is importable.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None


def _disabled_by_env() -> bool:
    return os.environ.get("BILIPEXT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = NUMBA_AVAILABLE and not _disabled_by_env()


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it untouched."""
    if NUMBA_AVAILABLE and not _disabled_by_env():
        return numba.njit(cache=True, nogil=True)(func)
    return func
