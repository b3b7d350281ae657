"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` mirrors them loop by loop.
"""
import math

import numpy as np

# |x| below this uses the power series; above it the closed-form recurrence.
SERIES_RADIUS = 1.0
SERIES_TERMS = 30


def _series_coeffs(order):
    j = np.arange(SERIES_TERMS)
    fact = np.array([math.factorial(i) for i in range(SERIES_TERMS)], dtype=float)
    return (-1.0) ** (order + j) / (fact * (order + j + 1))


_COEFFS = [_series_coeffs(p) for p in range(3)]


def moment_integral(x, order):
    """Elementwise ``int_{-1}^0 theta**order * exp(x*theta) dtheta``.

    Parameters
    ----------
    x : array_like of complex
    order : {0, 1, 2}

    Returns
    -------
    ndarray of complex, same shape as ``x``.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    x = np.asarray(x, dtype=complex)
    out = np.empty_like(x)
    small = np.abs(x) < SERIES_RADIUS
    if small.any():
        xs = x[small]
        acc = np.zeros_like(xs)
        for c in _COEFFS[order][::-1]:
            acc = acc * xs + c
        out[small] = acc
    big = ~small
    if big.any():
        xb = x[big]
        em = np.exp(-xb)
        val = (1.0 - em) / xb
        for p in range(1, order + 1):
            val = (-((-1.0) ** p) * em - p * val) / xb
        out[big] = val
    return out


def transform_sum(lams, exponents, coeffs, order):
    """Batched ``sum_e coeffs[e] * moment_integral(lam + exponents[e], order)``.

    Parameters
    ----------
    lams : (L,) complex
    exponents : (E,) complex
    coeffs : (E, n, n) complex
    order : int

    Returns
    -------
    (L, n, n) complex
    """
    lams = np.asarray(lams, dtype=complex).ravel()
    exponents = np.asarray(exponents, dtype=complex).ravel()
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[1] if coeffs.ndim == 3 else 0
    if exponents.size == 0:
        return np.zeros((lams.size, n, n), dtype=complex)
    w = moment_integral(lams[:, None] + exponents[None, :], order)
    return np.einsum("le,eij->lij", w, coeffs)


def cauchy_scaled(cols, rows, scale):
    """Matrix ``out[r, k] = scale[r] / (cols[k] - rows[r])``.

    An exact coincidence ``cols[k] == rows[r]`` yields the limit value 1,
    which is the only coincidence callers admit (``scale[r]`` is then the
    vanishing difference itself).
    """
    cols = np.asarray(cols, dtype=complex)
    rows = np.asarray(rows, dtype=complex)
    scale = np.asarray(scale, dtype=complex)
    diff = cols[None, :] - rows[:, None]
    hit = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = scale[:, None] / diff
    out[hit] = 1.0
    return out
