"""Closed-form characteristic matrix of the neutral system.

The system is

    z'(t) = A_{-1} z'(t-1) + int_{-1}^0 A_2(th) z'(t+th) dth + int_{-1}^0 A_3(th) z(t+th) dth

with characteristic matrix

    Delta(lam) = lam I - lam e^{-lam} A_{-1} - lam T_2(lam) - T_3(lam),
    T_i(lam)   = int_{-1}^0 e^{lam th} A_i(th) dth.

``A_2`` and ``A_3`` are exponential polynomials, so every ``T_i`` has a
closed form and is evaluated without quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DomainError
from .spectral import ReferenceSpectrum

ROOT_SIGMA_RATIO = 1e-8
F_RCOND = 1e-12
CANONICAL_TOL = 1e-12


def _freeze(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class MatrixFunctionRep:
    """``A(th) = constant + th * linear + sum_e coeffs[e] * exp(exponents[e] * th)``.

    Duplicate exponents are merged; a zero exponent is folded into the
    constant term; exponential terms with an all-zero coefficient are dropped.
    Instances are immutable.
    """

    __slots__ = ("constant", "linear", "exponents", "coeffs")

    def __init__(self, n, constant=None, linear=None, exponents=(), coeffs=()):
        const = np.zeros((n, n), complex) if constant is None else np.array(constant, complex)
        lin = np.zeros((n, n), complex) if linear is None else np.array(linear, complex)
        exps = np.asarray(exponents, dtype=complex).ravel()
        cfs = np.asarray(coeffs, dtype=complex).reshape(exps.size, n, n)
        merged = {}
        for e, c in zip(exps, cfs):
            if e == 0:
                const = const + c
            elif e in merged:
                merged[e] = merged[e] + c
            else:
                merged[e] = c.copy()
        keep = [(e, c) for e, c in merged.items() if np.any(c != 0)]
        object.__setattr__(self, "constant", _freeze(const))
        object.__setattr__(self, "linear", _freeze(lin))
        object.__setattr__(self, "exponents", _freeze([e for e, _ in keep]))
        object.__setattr__(
            self, "coeffs", _freeze(np.array([c for _, c in keep]).reshape(len(keep), n, n))
        )

    def __setattr__(self, name, value):
        raise AttributeError("MatrixFunctionRep is immutable")

    @classmethod
    def zero(cls, n):
        return cls(n)

    @property
    def n(self):
        return self.constant.shape[0]

    def is_zero(self):
        return (not np.any(self.constant) and not np.any(self.linear)
                and self.exponents.size == 0)

    def __repr__(self):
        return (f"MatrixFunctionRep(n={self.n}, exponentials={self.exponents.size}, "
                f"constant={bool(np.any(self.constant))}, linear={bool(np.any(self.linear))})")

    def __eq__(self, other):
        if not isinstance(other, MatrixFunctionRep):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.constant, other.constant)
                and np.array_equal(self.linear, other.linear)
                and np.array_equal(self.exponents, other.exponents)
                and np.array_equal(self.coeffs, other.coeffs))

    def __add__(self, other):
        return MatrixFunctionRep(
            self.n, self.constant + other.constant, self.linear + other.linear,
            np.concatenate([self.exponents, other.exponents]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, c):
        return MatrixFunctionRep(self.n, c * self.constant, c * self.linear,
                                 self.exponents, c * self.coeffs)

    def left_multiply(self, M):
        """``M @ A(th)`` as a new representation."""
        M = np.asarray(M, dtype=complex)
        return MatrixFunctionRep(self.n, M @ self.constant, M @ self.linear, self.exponents,
                                 np.einsum("ij,ejk->eik", M, self.coeffs))

    def __call__(self, theta):
        """Evaluate at scalar or array ``theta``; returns (..., n, n)."""
        th = np.asarray(theta, dtype=float)
        out = (self.constant + th[..., None, None] * self.linear).astype(complex)
        if self.exponents.size:
            w = np.exp(th[..., None] * self.exponents)
            out = out + np.einsum("...e,eij->...ij", w, self.coeffs)
        return out

    def transform(self, lam, derivative=False):
        """``int_{-1}^0 e^{lam th} A(th) dth`` (or its ``lam``-derivative).

        ``lam`` may be a scalar (returns (n, n)) or 1-d array (returns (L, n, n)).
        """
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
        p = 1 if derivative else 0
        w_const = _backend.moment_integral(lam_arr, p)
        w_lin = _backend.moment_integral(lam_arr, p + 1)
        out = (w_const[:, None, None] * self.constant + w_lin[:, None, None] * self.linear)
        if self.exponents.size:
            out = out + _backend.transform_sum(lam_arr, self.exponents, self.coeffs, p)
        return out[0] if np.ndim(lam) == 0 else out

    def integral(self):
        """``int_{-1}^0 A(th) dth``."""
        return self.transform(0.0)

    def running_integral(self):
        """``th -> int_{-1}^th A(tau) dtau`` (requires a zero linear term)."""
        if np.any(self.linear):
            raise DomainError("running integral of a linear term leaves the representation")
        n = self.n
        # c e^{e tau} integrates to c (e^{e th} - e^{-e}) / e
        shift = -np.einsum("e,eij->ij", np.exp(-self.exponents) / self.exponents, self.coeffs)
        return MatrixFunctionRep(n, self.constant + shift, self.constant, self.exponents,
                                 self.coeffs / self.exponents[:, None, None])


def transform_coeff(rep, lam):
    """Closed-form ``int_{-1}^0 e^{lam th} A(th) dth``."""
    return rep.transform(lam)


@dataclass(frozen=True)
class SystemRealization:
    """System matrices ``A_{-1}``, ``A_2(th)``, ``A_3(th)``.

    ``canonical`` marks realizations with ``int A_3 = 0``; the flag is
    checked on construction.
    """

    A_minus1: np.ndarray
    A2: MatrixFunctionRep
    A3: MatrixFunctionRep
    canonical: bool = False

    def __post_init__(self):
        A = _freeze(self.A_minus1)
        object.__setattr__(self, "A_minus1", A)
        n = A.shape[0]
        if A.shape != (n, n) or self.A2.n != n or self.A3.n != n:
            raise DomainError("inconsistent system dimensions")
        if self.canonical:
            gap = np.max(np.abs(self.A3.integral()), initial=0.0)
            if gap > CANONICAL_TOL:
                raise DomainError(f"marked canonical but |int A3| = {gap:.3e}")

    @property
    def n(self):
        return self.A_minus1.shape[0]

    @classmethod
    def unperturbed(cls, A_minus1):
        A = np.asarray(A_minus1, dtype=complex)
        n = A.shape[0]
        return cls(A, MatrixFunctionRep.zero(n), MatrixFunctionRep.zero(n), canonical=True)

    def reference(self):
        """Reference spectrum from the eigenvalues of ``A_{-1}``."""
        return ReferenceSpectrum(np.linalg.eigvals(self.A_minus1))


def delta_eval(sys, lam):
    """``Delta(lam)``; scalar ``lam`` gives (n, n), an array gives (L, n, n)."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    n = sys.n
    eye = np.eye(n)
    lam3 = lam_arr[:, None, None]
    out = lam3 * (eye - np.exp(-lam3) * sys.A_minus1)
    if not sys.A2.is_zero():
        out = out - lam3 * sys.A2.transform(lam_arr)
    if not sys.A3.is_zero():
        out = out - sys.A3.transform(lam_arr)
    return out[0] if np.ndim(lam) == 0 else out


def delta_derivative(sys, lam):
    """``d Delta / d lam`` in closed form."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    n = sys.n
    lam3 = lam_arr[:, None, None]
    em = np.exp(-lam3)
    out = np.eye(n) - em * sys.A_minus1 + lam3 * em * sys.A_minus1
    if not sys.A2.is_zero():
        out = out - sys.A2.transform(lam_arr) - lam3 * sys.A2.transform(lam_arr, derivative=True)
    if not sys.A3.is_zero():
        out = out - sys.A3.transform(lam_arr, derivative=True)
    return out[0] if np.ndim(lam) == 0 else out


@dataclass(frozen=True)
class DegeneracyReport:
    """Smallest-singular-value data of ``Delta(lam)``.

    ``left_null`` is ``w`` with ``w^* Delta ~ 0``; ``right_null`` is ``v``
    with ``Delta v ~ 0``.
    """

    lam: complex
    sigma_min_ratio: float
    sigma_max: float
    left_null: np.ndarray
    right_null: np.ndarray
    left_residual: float
    right_residual: float

    def is_root(self, threshold=ROOT_SIGMA_RATIO):
        return self.sigma_min_ratio <= threshold

    def to_dict(self):
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "sigma_min_ratio": self.sigma_min_ratio,
            "sigma_max": self.sigma_max,
            "left_null": [[z.real, z.imag] for z in self.left_null],
            "right_null": [[z.real, z.imag] for z in self.right_null],
            "left_residual": self.left_residual,
            "right_residual": self.right_residual,
        }


def degeneracy_of_matrix(D, lam=0j):
    U, s, Vh = np.linalg.svd(D)
    w = U[:, -1]
    v = Vh[-1].conj()
    smax = float(s[0])
    ratio = 0.0 if smax == 0 else float(s[-1] / smax)
    return DegeneracyReport(
        complex(lam), ratio, smax, w, v,
        float(np.linalg.norm(w.conj() @ D)), float(np.linalg.norm(D @ v)),
    )


def degeneracy(sys, lam):
    """SVD of ``Delta(lam)`` with left/right null-vector estimates."""
    return degeneracy_of_matrix(delta_eval(sys, lam), lam)


def f_matrix(sys, lam, reference=None):
    """Auxiliary matrix ``F(lam) = I + P_0 R(lam) B_0`` and the identity residual.

    ``F`` is assembled from the resolvent of the unperturbed operator applied
    to ``(v, 0)``: its function component is
    ``phi(th) = -e^{lam th} K^{-1} v / lam`` with ``K = I - e^{-lam} A_{-1}``,
    and ``P_0`` acts as ``int A_2 phi' + int A_3 phi``.  The residual compares
    with ``Delta(lam) K^{-1} / lam``.

    Raises
    ------
    DomainError
        If ``lam`` lies on the unperturbed spectrum (``lam = 0`` or ``K``
        singular); the message names the offending grid point.
    """
    lam = complex(lam)
    n = sys.n
    if lam == 0:
        raise DomainError("lam = 0 belongs to the unperturbed spectrum")
    K = np.eye(n) - np.exp(-lam) * sys.A_minus1
    s = np.linalg.svd(K, compute_uv=False)
    if s[0] == 0 or s[-1] / s[0] < F_RCOND:
        reference = sys.reference() if reference is None else reference
        m, k, val = reference.nearest(lam)
        raise DomainError(
            f"lam = {lam} lies on the unperturbed spectrum at grid point "
            f"lambda_tilde({m}, {k}) = {val}"
        )
    Kinv = np.linalg.inv(K)
    # phi = e^{lam th} Phi0 with Phi0 = -K^{-1}/lam, phi' = lam phi
    Phi0 = -Kinv / lam
    P0R = sys.A2.transform(lam) @ (lam * Phi0) + sys.A3.transform(lam) @ Phi0
    F = np.eye(n) + P0R
    via_delta = delta_eval(sys, lam) @ Kinv / lam
    resid = float(np.linalg.norm(F - via_delta) / np.linalg.norm(F))
    return F, resid
