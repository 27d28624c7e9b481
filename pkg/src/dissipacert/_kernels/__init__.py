"""Simulation kernels with a compiled fast path and a pure-numpy fallback.

The Cython extension (``dissipacert._kernels._core``) is used when it was
built for the running interpreter; otherwise the numpy implementation in
``_ref`` takes over transparently. Setting the environment variable
``DISSIPACERT_PURE_PYTHON=1`` forces the fallback regardless.
"""

import os

import numpy as np

from . import _ref

if os.environ.get("DISSIPACERT_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _ref

__all__ = ["affine_recursion", "affine_recursion_const", "backend"]


def backend():
    """Name of the active kernel implementation: "compiled" or "python"."""
    return "python" if _impl is _ref else "compiled"


def affine_recursion(a, w, x0):
    """Run x(k+1) = a x(k) + w[:, k] and return (states, first_bad_index).

    ``states`` has shape (n, steps+1) with the initial state in column 0;
    ``first_bad_index`` is -1 for a finite run, otherwise the column index
    of the first non-finite state (later columns are zeroed). ``x0`` must be
    finite — column 0 is stored, not checked.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _impl.affine_recursion(a, w, x0)


def affine_recursion_const(a, w, x0, steps):
    """:func:`affine_recursion` with a constant per-step additive term."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _impl.affine_recursion_const(a, w, x0, int(steps))
