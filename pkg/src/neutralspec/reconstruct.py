"""Turn solved coefficients into concrete kernels ``A_2(th)``, ``A_3(th)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .charmatrix import MatrixFunctionRep, SystemRealization
from .errors import ConditioningError, DomainError, InternalConsistencyError
from .spectral import minus_one_matrix

GRAM_COND_LIMIT = 1e10
Q1_IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class GramSystem:
    """Gram matrix of ``{exp(lt_k th)}`` on ``[-1, 0]`` for one channel.

    The bilinear form has ``G[k, k'] = int exp((lt_k + lt_k') th) dth``; the
    Hermitian form conjugates the second factor.
    """

    m: int
    N: int
    G: np.ndarray
    condition: float
    hermitian: bool = False


def gram_matrix(reference, m, N, hermitian=False):
    """Closed-form Gram matrix of ``{exp(lt(m, k) th)}`` for ``|k| <= N``.

    Uses ``exp(-(lt_k + lt_k')) = mu_m^{-2}`` (``|mu_m|^{-2}`` for the
    Hermitian form); sums of modulus below one go through the power series
    of the moment integral.

    The bilinear form pairs index ``k`` with the index whose imaginary part
    cancels it.  When ``Arg mu_m`` is not 0 that partner can fall outside a
    symmetric window, so its condition grows with ``N`` even for legal grids;
    the Hermitian form is the Riesz-basis diagnostic.
    """
    lt = reference.window(m, N)
    mu = reference.mu[m]
    if hermitian:
        s = lt[:, None] + lt.conj()[None, :]
        inv_mu2 = 1.0 / abs(mu) ** 2
    else:
        s = lt[:, None] + lt[None, :]
        inv_mu2 = 1.0 / mu ** 2
    G = np.empty_like(s)
    small = np.abs(s) < 1.0
    G[small] = _backend.moment_integral(s[small], 0)
    G[~small] = (1.0 - inv_mu2) / s[~small]
    with np.errstate(divide="ignore"):
        cond = float(np.linalg.cond(G))
    return GramSystem(m, N, G, cond if np.isfinite(cond) else np.inf, hermitian)


def p_to_realization(solution, frame, reference, N_s=None):
    """Canonical realization (``A_3 = 0``) reproducing the coefficient table.

    The kernel in frame coordinates is ``g_{jm}(th) = sum_k c_k exp(-lt(m,k) th)``
    with ``c_k = p(k, m, j) / lt(m, k)``.  Since
    ``int exp(-lt_k th) exp(lt_k' th) dth = delta_{k k'}``, these coefficients
    match ``int g_{jm}(th) exp(lt(m,k) th) dth = p(k, m, j) / lt(m, k)`` on the
    window and vanish outside it.  Finally ``A_2 = Y g Z^*``.
    """
    N = solution.N if N_s is None else N_s
    if N != solution.N:
        raise DomainError(f"window {N} differs from the solution window {solution.N}")
    n = reference.n
    exps, coeffs = [], []
    for m in range(n):
        lt = reference.window(m, N)
        used = np.any(solution.p[m] != 0, axis=0)
        if np.any(used & (lt == 0)):
            raise DomainError(f"grid point 0 of channel {m} carries a coefficient")
        c = np.where(used, solution.p[m] / np.where(lt == 0, 1.0, lt), 0)
        zm = frame.Z[:, m].conj()
        for i in np.nonzero(used)[0]:
            exps.append(-lt[i])
            coeffs.append(np.outer(frame.Y @ c[:, i], zm))
    A2 = MatrixFunctionRep(n, exponents=exps, coeffs=np.array(coeffs).reshape(-1, n, n))
    A_minus1 = minus_one_matrix(frame, reference.mu)
    return SystemRealization(A_minus1, A2, MatrixFunctionRep.zero(n), canonical=True)


def realized_coefficients(sys, frame, reference, N):
    """``p(k, m, j) = lt(m, k) * z_j^* T_2(lt(m, k)) y_m`` read back from a system.

    Only meaningful for systems with ``A_3 = 0``.  Returns ``p[m, j, k + N]``.
    """
    n = reference.n
    out = np.empty((n, n, 2 * N + 1), dtype=complex)
    for m in range(n):
        lt = reference.window(m, N)
        T = sys.A2.transform(lt)
        # z_j^* T y_m for all j
        out[m] = (lt[:, None] * (frame.Z.conj().T @ T @ frame.Y[:, m])).T
    return out


def _q1_identity_residual(A2_hat, A3_hat, A2, A3, Q1, A_minus1, rng, count=10):
    n = A_minus1.shape[0]
    worst = 0.0
    for _ in range(count):
        s = complex(rng.uniform(-3, 3), rng.uniform(-10, 10))
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        # test function phi(th) = e^{s th} v: phi' = s phi, phi(0) = v, phi(-1) = e^{-s} v
        lhs = (Q1 @ (v - np.exp(-s) * (A_minus1 @ v))
               + s * (A2_hat.transform(s) @ v) + A3_hat.transform(s) @ v)
        rhs = s * (A2.transform(s) @ v) + A3.transform(s) @ v
        worst = max(worst, np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1.0))
    return worst


def absorb_q1(A2_hat, A3_hat, Q1, A_minus1, check=True, seed=0):
    """Fold ``Q_1 (phi(0) - A_{-1} phi(-1))`` into the two kernels.

    Returns ``A_2 = A2_hat + (th+1) Q_1 - th Q_1 A_{-1}`` and
    ``A_3 = A3_hat + Q_1 - Q_1 A_{-1}``.  With ``check`` the functional
    identity is verified on ten seeded exponential test functions.
    """
    Q1 = np.asarray(Q1, dtype=complex)
    A_minus1 = np.asarray(A_minus1, dtype=complex)
    n = A_minus1.shape[0]
    if not np.any(Q1):
        return A2_hat, A3_hat
    QA = Q1 @ A_minus1
    A2 = A2_hat + MatrixFunctionRep(n, constant=Q1, linear=Q1 - QA)
    A3 = A3_hat + MatrixFunctionRep(n, constant=Q1 - QA)
    if check:
        resid = _q1_identity_residual(A2_hat, A3_hat, A2, A3, Q1, A_minus1,
                                      np.random.default_rng(seed))
        if resid > Q1_IDENTITY_TOL:
            raise InternalConsistencyError(f"Q1 absorption identity residual {resid:.3e}")
    return A2, A3


def gram_report(reference, sizes=(8, 16, 32, 64)):
    """Gram conditions per channel and window size.

    Raises
    ------
    ConditioningError
        If a Hermitian Gram condition exceeds ``GRAM_COND_LIMIT``, which
        signals a grid that is not a Riesz basis.
    """
    rows = []
    for m in range(reference.n):
        bil = [gram_matrix(reference, m, N).condition for N in sizes]
        her = [gram_matrix(reference, m, N, hermitian=True).condition for N in sizes]
        rows.append({"m": m, "sizes": list(sizes), "conditions": bil,
                     "spread": max(bil) / min(bil), "hermitian_conditions": her,
                     "hermitian_spread": max(her) / min(her)})
        if max(her) > GRAM_COND_LIMIT:
            raise ConditioningError(f"Gram matrix of channel {m} is ill-conditioned",
                                    max(her))
    return rows
