# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-sample recursions used by the transmitter and receiver.

Each kernel takes its carried state explicitly and returns the updated state
so chunked processing matches whole-buffer processing exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def one_pole(double[::1] x, double alpha, double y0):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double state = y0
    for i in range(n):
        state = state + alpha * (x[i] - state)
        y[i] = state
    return out, state


def dc_block(double[::1] x, double r, double x_prev, double y_prev):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double xp = x_prev, yp = y_prev
    for i in range(n):
        yp = x[i] - xp + r * yp
        xp = x[i]
        y[i] = yp
    return out, xp, yp


def agc(double[::1] x, double attack, double release, double target,
        double floor, double level0):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double level = level0, mag, coef
    for i in range(n):
        mag = fabs(x[i])
        coef = attack if mag > level else release
        level = level + coef * (mag - level)
        y[i] = x[i] * target / (level if level > floor else floor)
    return out, level
