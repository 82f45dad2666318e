"""Kernel backend selection.

The compiled extension is used when it imports cleanly; otherwise the NumPy
twin is loaded. Set ``BOSONSIG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as python_backend

try:
    if os.environ.get("BOSONSIG_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _active
    compiled_backend = _active
except ImportError:
    _active = python_backend
    compiled_backend = None

BACKEND = _active.BACKEND
permanent = _active.permanent
submatrix_permanents = _active.submatrix_permanents
grow_tree = _active.grow_tree

__all__ = [
    "BACKEND",
    "compiled_backend",
    "grow_tree",
    "permanent",
    "python_backend",
    "submatrix_permanents",
]
