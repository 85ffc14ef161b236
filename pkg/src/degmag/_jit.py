"""Backend selection for the compiled kernels.

Set ``DEGMAG_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time; :func:`set_backend` switches at runtime (tests and the
benchmark use it).
"""

from __future__ import annotations

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:  # pragma: no cover - numba is a hard dependency
        return False
    return True


HAVE_NUMBA = _numba_available()
_backend = "numpy" if (os.environ.get("DEGMAG_DISABLE_NUMBA", "").lower() in _TRUTHY or not HAVE_NUMBA) else "numba"


def backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
