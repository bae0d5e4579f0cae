# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: coefficient recurrences and cyclic Jacobi sweeps."""

from libc.math cimport sqrt, fabs, copysign


def fill_theta(double[::1] out, Py_ssize_t start):
    cdef Py_ssize_t k
    cdef double prev = out[start - 1]
    for k in range(start, out.shape[0]):
        prev = 0.5 * (1.0 + sqrt(4.0 * prev * prev + 1.0))
        out[k] = prev


def fill_phi(double[::1] out, Py_ssize_t start):
    cdef Py_ssize_t k
    cdef double prev = out[start - 1]
    for k in range(start, out.shape[0]):
        prev = prev + 1.0 + sqrt(1.0 + prev)
        out[k] = prev


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, r
    cdef int sweep
    cdef double off, apq, app, aqq, theta, t, c, s, x, y
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    x = a[r, p]
                    y = a[r, q]
                    a[r, p] = c * x - s * y
                    a[r, q] = s * x + c * y
                for r in range(n):
                    x = a[p, r]
                    y = a[q, r]
                    a[p, r] = c * x - s * y
                    a[q, r] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    x = v[r, p]
                    y = v[r, q]
                    v[r, p] = c * x - s * y
                    v[r, q] = s * x + c * y
    return max_sweeps
