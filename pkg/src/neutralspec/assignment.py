"""Truncated block-operator systems for the inverse spectral problem.

For a fixed channel ``m`` the unknowns are the sequences ``x^j`` (one per
channel ``j``), stacked into one vector of length ``(2N+1) n``.  Row block
``m0`` encodes the targets of channel ``m0``:

    sum_j diag(alpha(j, m0, .)) S_{m m0} x^j = alpha(m, m0, .)          (m0 != m)
    sum_j diag(alpha(j, m, .)) Lam_m S_{mm} x^j = Lam_m alpha(m, m, .)

with ``S_{m m0}[k0, k] = 1 / (lt(m, k) - lam(m0, k0))`` and
``Lam_m = diag(lt(m, k) - lam(m, k))``.  The coefficient table is recovered
as ``p(k, m, j) = -x^j_k * beta(m, k)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .charmatrix import SystemRealization, delta_eval
from .errors import (
    AdjustmentFailed,
    DomainError,
    InternalConsistencyError,
    SolverSingular,
)
from .reconstruct import absorb_q1
from .spectral import AlphaTable, SpectralTarget, alpha_decompose

SOLVE_COND_LIMIT = 1e10
REPAIR_COND_LIMIT = 1e8
EPS_FLOOR = 1e-6
POST_IDENTITY_TOL = 1e-10


def s_entry(reference, target, m, m0, k, k0):
    """``1 / (lambda_tilde(m, k) - lambda(m0, k0))``.

    Raises
    ------
    DomainError
        On any exact coincidence.  The admissible one, ``(m, k) == (m0, k0)``,
        only has a meaning through the row-scaled limit used by
        :func:`assemble_D`.
    """
    lt = reference.lambda_tilde(m, k)
    lam = target.lam_at(m0, k0)
    if lt == lam:
        if (m, k) == (m0, k0):
            raise DomainError(
                f"lambda({m0}, {k0}) coincides with its own grid point; "
                "use the scaled limit row"
            )
        raise DomainError(
            f"lambda({m0}, {k0}) = {lam} coincides with grid point ({m}, {k})"
        )
    return 1.0 / (lt - lam)


def _s_block(reference, target, m, m0, N):
    cols = reference.window(m, N)
    rows = target.lam_window(m0, N)
    if m0 == m:
        return _backend.cauchy_scaled(cols, rows, cols - rows)
    hit = cols[None, :] == rows[:, None]
    if hit.any():
        r, k = np.argwhere(hit)[0]
        raise DomainError(
            f"lambda({m0}, {r - N}) coincides with grid point ({m}, {k - N})"
        )
    return _backend.cauchy_scaled(cols, rows, np.ones_like(rows))


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense truncation of the block operator ``D_m`` with its right-hand side."""

    m: int
    N: int
    matrix: np.ndarray
    rhs: np.ndarray
    row_labels: list
    col_labels: list

    def block(self, m0, j):
        size = 2 * self.N + 1
        return self.matrix[m0 * size:(m0 + 1) * size, j * size:(j + 1) * size]


def assemble_D(m, reference, target, alpha, N):
    """Assemble ``D_m`` and the stacked right-hand side on ``|k| <= N``."""
    n = reference.n
    size = 2 * N + 1
    D = np.empty((n * size, n * size), dtype=complex)
    rhs = np.empty(n * size, dtype=complex)
    for m0 in range(n):
        S = _s_block(reference, target, m, m0, N)
        rs = slice(m0 * size, (m0 + 1) * size)
        for j in range(n):
            D[rs, j * size:(j + 1) * size] = alpha.block(j, m0, N)[:, None] * S
        a = alpha.block(m, m0, N)
        if m0 == m:
            a = (reference.window(m, N) - target.lam_window(m, N)) * a
        rhs[rs] = a
    ks = range(-N, N + 1)
    rows = [(m0, k0) for m0 in range(n) for k0 in ks]
    cols = [(j, k) for j in range(n) for k in ks]
    return TruncatedOperator(m, N, D, rhs, rows, cols)


@dataclass(frozen=True)
class AssignmentSolution:
    """Solved coefficient table.

    ``p[m, j, k + N]`` holds ``p(k, m, j)``.
    """

    N: int
    p: np.ndarray
    conditions: np.ndarray
    residuals: np.ndarray
    operators: tuple = field(default=(), repr=False)

    @property
    def n(self):
        return self.p.shape[0]

    def coeff(self, k, m, j):
        if abs(k) > self.N:
            return 0j
        return complex(self.p[m, j, k + self.N])


def _solve_channel(m, reference, target, alpha, N, cond_limit):
    op = assemble_D(m, reference, target, alpha, N)
    cond = np.linalg.cond(op.matrix)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SolverSingular(m, cond)
    x = np.linalg.solve(op.matrix, op.rhs)
    nr = np.linalg.norm(op.rhs)
    res = np.linalg.norm(op.matrix @ x - op.rhs)
    res = res / nr if nr > 0 else res
    return op, x, cond, res


def solve_assignment(reference, frame, target, N_s, alpha=None, cond_limit=SOLVE_COND_LIMIT,
                     keep_operators=False, parallel=False):
    """Solve the ``n`` truncated systems ``D_m x = rhs``.

    Parameters
    ----------
    N_s : int
        Solve window; must be at least ``2 * target.window``.
    alpha : AlphaTable, optional
        Coordinates of the target vectors; computed from ``target`` if omitted.

    Raises
    ------
    SolverSingular
        If some ``D_m`` has condition estimate above ``cond_limit``.
    """
    reference.require_assignable()
    if N_s < 2 * target.window:
        raise DomainError(f"solve window {N_s} < 2 * target window {target.window}")
    alpha = alpha_decompose(target, frame) if alpha is None else alpha
    n = reference.n
    size = 2 * N_s + 1

    def work(m):
        return _solve_channel(m, reference, target, alpha, N_s, cond_limit)

    if parallel and n > 1:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(work, range(n)))
    else:
        results = [work(m) for m in range(n)]
    p = np.empty((n, n, size), dtype=complex)
    for m, (_, x, _, _) in enumerate(results):
        beta = reference.beta_tilde(m, np.arange(-N_s, N_s + 1))
        p[m] = -x.reshape(n, size) * beta
    p.setflags(write=False)
    return AssignmentSolution(
        N_s, p,
        np.array([r[2] for r in results]),
        np.array([r[3] for r in results]),
        tuple(r[0] for r in results) if keep_operators else (),
    )


def spectral_equation_residual(solution, reference, frame, lam0, d):
    """Residual of the component-wise spectral equation at ``(lam0, d)``.

    For every channel ``m`` evaluates
    ``alpha_m + sum_{j,k} alpha_j p(k,m,j) / beta(m,k) / (lt(m,k) - lam0)``
    with ``alpha_m = d^* y_m``.  When ``lam0`` is a grid point of channel
    ``m`` inside the window the pole is removed by multiplying through with
    ``lt - lam0``.  Returns the per-channel absolute residuals.
    """
    lam0 = complex(lam0)
    alpha = np.asarray(d, dtype=complex).conj() @ frame.Y
    N = solution.N
    ks = np.arange(-N, N + 1)
    out = np.empty(reference.n)
    for m in range(reference.n):
        lt = reference.window(m, N)
        c = alpha @ (solution.p[m] / reference.beta_tilde(m, ks))
        hit = np.nonzero(lt == lam0)[0]
        if hit.size:
            out[m] = abs(c[hit[0]])
        else:
            out[m] = abs(alpha[m] + np.sum(c / (lt - lam0)))
    return out


@dataclass(frozen=True)
class InvertibilityReport:
    """Truncated-operator diagnostics for channel ``m``.

    ``sigma[m0] = (sigma_min, sigma_max)`` of ``S_{m m0}`` (``m0 != m``) or of
    ``Lam_m S_{mm}`` (``m0 == m``).  ``eps[m0]`` holds
    ``mu_m exp(-lam(m0, k)) - 1`` for ``m0 != m``; ``q`` holds
    ``(mu_m exp(-lam(m, k)) - 1) / (lt(m, k) - lam(m, k))``.
    """

    m: int
    N: int
    sigma: dict
    eps: dict
    q: np.ndarray
    flagged: tuple

    def to_dict(self):
        return {
            "m": self.m, "N": self.N,
            "sigma": {str(k): list(v) for k, v in self.sigma.items()},
            "min_abs_eps": {str(k): float(np.min(np.abs(v))) for k, v in self.eps.items()},
            "q_range": [float(np.min(np.abs(self.q))), float(np.max(np.abs(self.q)))],
            "flagged": [list(f) for f in self.flagged],
        }


def invertibility_diagnostics(m, reference, target, N):
    n = reference.n
    mu_m = reference.mu[m]
    sigma, eps, flagged = {}, {}, []
    for m0 in range(n):
        S = _s_block(reference, target, m, m0, N)
        s = np.linalg.svd(S, compute_uv=False)
        sigma[m0] = (float(s[-1]), float(s[0]))
        lam = target.lam_window(m0, N)
        if m0 != m:
            e = mu_m * np.exp(-lam) - 1.0
            eps[m0] = e
            for i in np.nonzero(np.abs(e) < EPS_FLOOR)[0]:
                flagged.append((m0, int(i) - N))
    shift = reference.window(m, N) - target.lam_window(m, N)
    # (e^s - 1)/s equals the zeroth moment integral at -s; 1 at coincidence
    q = _backend.moment_integral(-shift, 0)
    return InvertibilityReport(m, N, sigma, eps, q, tuple(flagged))


@dataclass(frozen=True)
class PerturbationOutcome:
    alpha: AlphaTable
    target: SpectralTarget
    delta_norm: float
    retries: int
    window: int
    conditions: np.ndarray


def _channel_conditions(reference, target, alpha, N_s):
    return np.array([
        np.linalg.cond(assemble_D(m, reference, target, alpha, N_s).matrix)
        for m in range(reference.n)
    ])


def _extend_alpha(alpha, N):
    if N <= alpha.window:
        return alpha
    n = alpha.n
    coef = np.tile(np.eye(n, dtype=complex)[:, None, :], (1, 2 * N + 1, 1))
    off = N - alpha.window
    coef[:, off:off + 2 * alpha.window + 1, :] = alpha.coef
    return AlphaTable(N, coef)


def target_from_alpha(target, alpha):
    """Target whose vectors have the coordinates in ``alpha``."""
    N = alpha.window
    if N > target.window:
        lam = np.array([target.lam_window(m, N) for m in range(target.n)])
        target = target.replace(window=N, lam=lam, d=None)
    return target.replace(d=alpha.vectors(target.frame))


def lemma2_adjust(alpha, target, reference, epsilon, seed, N, N_s=None,
                  max_retries=16, accept_cond=REPAIR_COND_LIMIT):
    """Randomized repair of the coordinate table so that every ``D_m`` inverts.

    Entries with ``|k0| <= N`` receive a seeded complex perturbation of total
    squared size ``epsilon / 2``; each retry redraws from
    ``default_rng([seed, retry])``.  The first draw for which all condition
    estimates are at most ``accept_cond`` is returned.

    Raises
    ------
    AdjustmentFailed
        When ``epsilon <= 0`` and the input is singular, or all retries fail.
    """
    N_s = 4 * max(target.window, N) if N_s is None else N_s
    conds = _channel_conditions(reference, target, alpha, N_s)
    if np.all(conds <= accept_cond):
        return PerturbationOutcome(alpha, target, 0.0, 0, N, conds)
    if epsilon <= 0:
        raise AdjustmentFailed("no room to perturb (epsilon <= 0)", float(np.max(conds)))
    base = _extend_alpha(alpha, N)
    lo = base.window - N
    hi = base.window + N + 1
    best = float(np.max(conds))
    for retry in range(1, max_retries + 1):
        rng = np.random.default_rng([seed, retry])
        shape = (base.n, hi - lo, base.n)
        delta = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        delta *= np.sqrt(0.5 * epsilon) / np.linalg.norm(delta)
        coef = base.coef.copy()
        coef[:, lo:hi, :] += delta
        cand = AlphaTable(base.window, coef)
        cand_target = target_from_alpha(target, cand)
        conds = _channel_conditions(reference, cand_target, cand, N_s)
        worst = float(np.max(conds))
        best = min(best, worst)
        if worst <= accept_cond:
            return PerturbationOutcome(
                cand, cand_target, float(np.sum(np.abs(delta) ** 2)), retry, N, conds
            )
    raise AdjustmentFailed(
        f"no invertible draw in {max_retries} retries (best cond={best:.3e})", best
    )


@dataclass(frozen=True)
class FinitePartTransform:
    """Matrix ``C`` realizing the finite part and the transformed targets."""

    C: np.ndarray
    M_bound: float
    target: SpectralTarget
    source: SpectralTarget

    def to_dict(self):
        return {"M_bound": self.M_bound,
                "C": [[[z.real, z.imag] for z in row] for row in self.C]}


def finite_part_matrix(lam0, d0):
    """``C`` with ``d0_j^* C = lam0_j d0_j^*``; ``d0`` holds the vectors as columns."""
    d0 = np.asarray(d0, dtype=complex)
    lam0 = np.asarray(lam0, dtype=complex)
    if d0.shape[0] != d0.shape[1] or np.linalg.matrix_rank(d0) < d0.shape[0]:
        raise DomainError("finite-part vectors must form a basis")
    Dh = d0.conj().T
    return np.linalg.solve(Dh, lam0[:, None] * Dh)


def finite_part_pretransform(target, frame=None, window=None):
    """Transform targets so that a base solve absorbs the finite part.

    Every target vector becomes ``f = (I - C/lam)^* d`` (``C^* d`` at
    ``lam = 0``) for ``|k| <= window`` (default: the target window), so that
    ``d^* Delta(lam) = f^* Delta_hat(lam)`` once
    ``Delta = (I - C/lam) Delta_hat``.  Beyond the window the transformed
    vectors are replaced by ``z_m`` as usual.
    """
    if target.finite_part is None:
        raise DomainError("target has no finite part")
    frame = target.frame if frame is None else frame
    lam0, d0 = target.finite_part
    if d0.shape[1] != target.n:
        raise DomainError(f"finite part needs {target.n} vectors, got {d0.shape[1]}")
    C = finite_part_matrix(lam0, d0)
    W = target.window if window is None else max(window, target.window)
    n = target.n
    eye = np.eye(n)
    lam = np.array([target.lam_window(m, W) for m in range(n)])
    d = np.array([target.d_window(m, W) for m in range(n)])
    f = np.empty_like(d)
    M = np.linalg.norm(C, 2)
    for m in range(n):
        for i, lv in enumerate(lam[m]):
            T = C if lv == 0 else eye - C / lv
            s = np.linalg.svd(T, compute_uv=False)
            if s[-1] <= 1e-12 * s[0]:
                raise DomainError(f"I - C/lambda is singular at lambda = {lv}")
            if lv != 0:
                M = max(M, s[0])
            f[m, i] = T.conj().T @ d[m, i]
    base = SpectralTarget(target.reference, frame, W, lam=lam, d=f,
                          coincidence_tol=target.coincidence_tol)
    return FinitePartTransform(C, float(M), base, target)


def finite_part_posttransform(hat_sys, C, check_points=20, seed=0):
    """System with ``Delta(lam) = (I - C/lam) Delta_hat(lam)``.

    With the minus-sign convention for ``Delta`` this is
    ``A_2 = A2_hat + (th+1) C - th C A_{-1}`` and
    ``A_3 = A3_hat + C - C A_{-1} - C A2_hat(th) + int_{-1}^th C A3_hat``.
    The identity is checked at ``check_points`` seeded points.
    """
    if not hat_sys.canonical:
        raise DomainError("post-transform needs a canonical base system")
    C = np.asarray(C, dtype=complex)
    if not np.any(C):
        return hat_sys
    A2, A3 = absorb_q1(hat_sys.A2, hat_sys.A3, C, hat_sys.A_minus1)
    A3 = A3 - hat_sys.A2.left_multiply(C)
    if not hat_sys.A3.is_zero():
        A3 = A3 + hat_sys.A3.left_multiply(C).running_integral()
    sys = SystemRealization(hat_sys.A_minus1, A2, A3, canonical=False)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, check_points) + 1j * rng.uniform(-30, 30, check_points)
    lhs = delta_eval(sys, pts)
    rhs = (np.eye(sys.n) - C / pts[:, None, None]) @ delta_eval(hat_sys, pts)
    resid = np.max(np.linalg.norm(lhs - rhs, axis=(1, 2)) / np.linalg.norm(lhs, axis=(1, 2)))
    if resid > POST_IDENTITY_TOL:
        raise InternalConsistencyError(
            f"finite-part identity residual {resid:.3e} exceeds {POST_IDENTITY_TOL}"
        )
    return sys

