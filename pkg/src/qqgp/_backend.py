"""Select the compiled kernels when available, otherwise the numpy ones.

``QQGP_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def _resolve(name: str):
    name = (name or "auto").lower()
    if name == "auto":
        return _ckernels if _ckernels is not None else _pykernels
    if name not in ("python", "compiled"):
        raise ValueError(f"unknown backend {name!r}")
    if name not in _BACKENDS:
        raise ImportError("compiled kernels are not built; reinstall the package")
    return _BACKENDS[name]


_active = _resolve(os.environ.get("QQGP_BACKEND", "auto"))


def active():
    """Module currently providing the kernels."""
    return _active


def available() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> str:
    """Switch backend at run time; returns the previous backend name."""
    global _active
    prev = _active.NAME
    _active = _resolve(name)
    return prev
