"""Compiled simulation kernels: dense affine state recursions."""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def affine_recursion(const double[:, ::1] a, const double[:, ::1] w,
                     const double[::1] x0):
    """Run x(k+1) = a x(k) + w[:, k], collecting every state.

    Returns ``(states, first_bad)``: ``states`` is (n, steps+1) with
    ``states[:, 0] = x0``; ``first_bad`` is the column index of the first
    non-finite state (-1 for a clean run). On divergence the recursion stops
    and the columns past ``first_bad`` stay zero.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t steps = w.shape[1]
    states_arr = np.zeros((n, steps + 1))
    cdef double[:, ::1] states = states_arr
    cdef Py_ssize_t i, j, k
    cdef double acc
    cdef bint bad
    for i in range(n):
        states[i, 0] = x0[i]
    for k in range(steps):
        bad = False
        for i in range(n):
            acc = w[i, k]
            for j in range(n):
                acc += a[i, j] * states[j, k]
            states[i, k + 1] = acc
            if not isfinite(acc):
                bad = True
        if bad:
            return states_arr, k + 1
    return states_arr, -1


def affine_recursion_const(const double[:, ::1] a, const double[::1] w,
                           const double[::1] x0, Py_ssize_t steps):
    """Same as :func:`affine_recursion` with a constant per-step term ``w``."""
    cdef Py_ssize_t n = a.shape[0]
    states_arr = np.zeros((n, steps + 1))
    cdef double[:, ::1] states = states_arr
    cdef Py_ssize_t i, j, k
    cdef double acc
    cdef bint bad
    for i in range(n):
        states[i, 0] = x0[i]
    for k in range(steps):
        bad = False
        for i in range(n):
            acc = w[i]
            for j in range(n):
                acc += a[i, j] * states[j, k]
            states[i, k + 1] = acc
            if not isfinite(acc):
                bad = True
        if bad:
            return states_arr, k + 1
    return states_arr, -1
