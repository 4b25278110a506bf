"""Kernel backend selection.

Batch sampling has two interchangeable implementations: a compiled Cython
extension (derange._kernels) and a pure-numpy module (derange._kernels_py).
Both consume the underlying bit stream in exactly the same order, so for a
given (seed, stream_id) they return bit-identical batches; the compiled one
is just faster.

The compiled kernel is preferred when importable.  Set DERANGE_BACKEND to
"python" or "cython" to force a choice, or call set_backend at runtime.
"""

from __future__ import annotations

import os
from typing import Optional

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_forced: Optional[str] = None


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def _env_choice() -> Optional[str]:
    name = os.environ.get("DERANGE_BACKEND", "").strip().lower()
    return name or None


def set_backend(name: Optional[str]) -> None:
    """Force a backend by name ("python"/"cython"), or None to auto-select."""
    global _forced
    if name is not None and name not in _BACKENDS:
        raise ValueError(
            f"backend {name!r} not available; have {available_backends()}"
        )
    _forced = name


def backend_name() -> str:
    """The backend that kernels() would currently return."""
    for choice in (_forced, _env_choice()):
        if choice:
            if choice not in _BACKENDS:
                raise ValueError(
                    f"backend {choice!r} not available; have {available_backends()}"
                )
            return choice
    return "cython" if "cython" in _BACKENDS else "python"


def kernels(name: Optional[str] = None):
    """The kernel module to use: explicit name > set_backend > env > default."""
    if name is not None:
        if name not in _BACKENDS:
            raise ValueError(
                f"backend {name!r} not available; have {available_backends()}"
            )
        return _BACKENDS[name]
    return _BACKENDS[backend_name()]
