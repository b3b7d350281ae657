# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)

cdef int SERIES_TERMS = 30
cdef double SERIES_RADIUS = 1.0
cdef double _C[3][30]


cdef void _init_coeffs():
    cdef int p, j
    cdef double fact
    for p in range(3):
        fact = 1.0
        for j in range(SERIES_TERMS):
            if j > 0:
                fact *= j
            _C[p][j] = (1.0 if (p + j) % 2 == 0 else -1.0) / (fact * (p + j + 1))


_init_coeffs()


cdef inline double complex _moment(double complex x, int order) nogil:
    cdef double complex acc, em, val
    cdef int j, p
    if cabs(x) < SERIES_RADIUS:
        acc = 0
        for j in range(SERIES_TERMS - 1, -1, -1):
            acc = acc * x + _C[order][j]
        return acc
    em = cexp(-x)
    val = (1.0 - em) / x
    for p in range(1, order + 1):
        val = (-(1.0 if p % 2 == 0 else -1.0) * em - p * val) / x
    return val


def moment_integral(x, int order):
    if order < 0 or order > 2:
        raise ValueError("order must be 0, 1 or 2")
    arr = np.asarray(x, dtype=complex)
    flat = np.ascontiguousarray(arr).ravel()
    out = np.empty_like(flat)
    cdef const double complex[::1] xv = flat
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _moment(xv[i], order)
    return out.reshape(arr.shape)


def transform_sum(lams, exponents, coeffs, int order):
    if order < 0 or order > 2:
        raise ValueError("order must be 0, 1 or 2")
    lam_a = np.ascontiguousarray(np.asarray(lams, dtype=complex).ravel())
    exp_a = np.ascontiguousarray(np.asarray(exponents, dtype=complex).ravel())
    coef_a = np.ascontiguousarray(np.asarray(coeffs, dtype=complex))
    cdef Py_ssize_t n = coef_a.shape[1] if coef_a.ndim == 3 else 0
    if exp_a.shape[0] == 0:
        return np.zeros((lam_a.shape[0], n, n), dtype=complex)
    w = np.empty((lam_a.shape[0], exp_a.shape[0]), dtype=complex)
    cdef const double complex[::1] lv = lam_a
    cdef const double complex[::1] ev = exp_a
    cdef double complex[:, ::1] wv = w
    cdef Py_ssize_t l, e
    with nogil:
        for l in range(lv.shape[0]):
            for e in range(ev.shape[0]):
                wv[l, e] = _moment(lv[l] + ev[e], order)
    # the contraction over exponents goes to BLAS
    return (w @ coef_a.reshape(exp_a.shape[0], n * n)).reshape(-1, n, n)


def cauchy_scaled(cols, rows, scale):
    col_a = np.ascontiguousarray(np.asarray(cols, dtype=complex).ravel())
    row_a = np.ascontiguousarray(np.asarray(rows, dtype=complex).ravel())
    sc_a = np.ascontiguousarray(np.asarray(scale, dtype=complex).ravel())
    out = np.empty((row_a.shape[0], col_a.shape[0]), dtype=complex)
    cdef const double complex[::1] cv = col_a
    cdef const double complex[::1] rv = row_a
    cdef const double complex[::1] sv = sc_a
    cdef double complex[:, ::1] ov = out
    cdef Py_ssize_t r, k
    cdef double complex diff
    with nogil:
        for r in range(rv.shape[0]):
            for k in range(cv.shape[0]):
                diff = cv[k] - rv[r]
                if diff == 0:
                    ov[r, k] = 1.0
                else:
                    ov[r, k] = sv[r] / diff
    return out
