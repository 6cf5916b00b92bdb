"""Kernel backend selection.

Hot inner loops in :mod:`aifpipe.kernels` exist twice: a numba ``@njit``
version and a vectorized pure-numpy fallback. Which one runs is decided
once per process from the ``AIFPIPE_BACKEND`` environment variable:

* ``auto`` (default) - numba when it imports, numpy otherwise
* ``numba``          - force numba, raise if it is unavailable
* ``numpy``          - force the pure-numpy path

``benchmarks/bench_backends.py`` times both paths side by side.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger("aifpipe")

_ENV_VAR = "AIFPIPE_BACKEND"
_VALID = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

_active: str | None = None


def _resolve(requested: str) -> str:
    if requested not in _VALID:
        raise ValueError(
            f"{_ENV_VAR} must be one of {_VALID}, got {requested!r}"
        )
    if requested == "auto":
        return "numba" if NUMBA_AVAILABLE else "numpy"
    if requested == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("AIFPIPE_BACKEND=numba but numba is not importable")
    return requested


def active_backend() -> str:
    """Return ``"numba"`` or ``"numpy"``, resolving the env var once."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get(_ENV_VAR, "auto"))
        log.debug("kernel backend: %s", _active)
    return _active


def set_backend(name: str) -> str:
    """Override the backend for this process (used by tests and benchmarks)."""
    global _active
    _active = _resolve(name)
    return _active
