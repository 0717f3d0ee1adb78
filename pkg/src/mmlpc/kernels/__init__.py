"""Kernel backend selection.

The compiled Cython backend is used when its extension module imported
successfully; otherwise the NumPy fallback takes over.  The environment
variable ``MMLPC_KERNELS`` (``auto``/``ext``/``py``) forces a choice at
import time, and :func:`use` switches at runtime (intended for
benchmarking; do not switch while a synthesis loop is running).
"""

import os

from . import _pyimpl

try:
    from . import _cyimpl
except ImportError:
    _cyimpl = None

HAVE_EXT = _cyimpl is not None

_BACKENDS = {"py": _pyimpl}
if HAVE_EXT:
    _BACKENDS["ext"] = _cyimpl


def _initial():
    requested = os.environ.get("MMLPC_KERNELS", "auto")
    if requested == "auto":
        return _cyimpl if HAVE_EXT else _pyimpl
    if requested not in _BACKENDS:
        available = ", ".join(sorted(_BACKENDS) + ["auto"])
        raise ImportError(f"MMLPC_KERNELS={requested!r} not available (choose from {available})")
    return _BACKENDS[requested]


_active = _initial()


def active():
    """Currently selected backend module."""
    return _active


def backend_name() -> str:
    return _active.NAME


def available_backends():
    return tuple(sorted(_BACKENDS))


def use(name: str):
    """Select a backend by name ('py', 'ext', or 'auto'). Returns the module."""
    global _active
    if name == "auto":
        _active = _cyimpl if HAVE_EXT else _pyimpl
    elif name in _BACKENDS:
        _active = _BACKENDS[name]
    else:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    return _active


def get(name: str):
    """Look up a backend module without changing the active one."""
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    return _BACKENDS[name]
