"""Pure-numpy fallback implementations of the simulation kernels.

Mirrors the compiled extension exactly: same signatures, same return
conventions. Finiteness is rescanned in chunks so the per-step cost stays
close to a single matrix-vector product.
"""

import numpy as np

_SCAN_CHUNK = 256


def _first_nonfinite(states, lo, hi):
    """Index of the first non-finite column of ``states`` in [lo, hi), or -1."""
    block = states[:, lo:hi]
    finite_cols = np.isfinite(block).all(axis=0)
    if finite_cols.all():
        return -1
    return lo + int(np.argmin(finite_cols))


def affine_recursion(a, w, x0):
    """Run x(k+1) = a x(k) + w[:, k], collecting every state.

    Returns ``(states, first_bad)``: ``states`` is (n, steps+1) with
    ``states[:, 0] = x0``; ``first_bad`` is the column index of the first
    non-finite state (-1 for a clean run). On divergence the recursion stops
    and the columns past ``first_bad`` stay zero.
    """
    n, steps = w.shape
    states = np.zeros((n, steps + 1))
    states[:, 0] = x0
    x = x0
    lo = 1
    # Overflow to inf/nan is a reported outcome here, not an anomaly.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = a @ x + w[:, k]
            states[:, k + 1] = x
            if k + 2 - lo >= _SCAN_CHUNK or k == steps - 1:
                bad = _first_nonfinite(states, lo, k + 2)
                if bad >= 0:
                    states[:, bad + 1 :] = 0.0
                    return states, bad
                lo = k + 2
    return states, -1


def affine_recursion_const(a, w, x0, steps):
    """Same as :func:`affine_recursion` with a constant per-step term ``w``."""
    n = a.shape[0]
    states = np.zeros((n, steps + 1))
    states[:, 0] = x0
    x = x0
    lo = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = a @ x + w
            states[:, k + 1] = x
            if k + 2 - lo >= _SCAN_CHUNK or k == steps - 1:
                bad = _first_nonfinite(states, lo, k + 2)
                if bad >= 0:
                    states[:, bad + 1 :] = 0.0
                    return states, bad
                lo = k + 2
    return states, -1
