"""Reference grids, biorthogonal frames and target spectral data.

Channels are indexed ``m = 0, ..., n-1``; grid indices ``k`` are arbitrary
integers.  Targets are stored on a finite window ``|k| <= window``; outside
it every target coincides with the reference grid and the reference vector
(the tail convention), so all square-summability conditions reduce to
finite sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, DomainError

TWO_PI = 2.0 * np.pi
FRAME_RCOND = 1e-12
SOLVABILITY_WARNING = 0.25


def _principal_arg(mu):
    arg = np.angle(mu)
    # (-pi, pi]: a negative zero imaginary part must not flip the branch
    return np.where(arg == -np.pi, np.pi, arg)


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def reference_grid(mu, m, k):
    """Return ``ln|mu_m| + i (Arg mu_m + 2 pi k)`` with ``Arg`` in ``(-pi, pi]``.

    ``k`` may be an integer array, in which case an array is returned.
    """
    mu_m = complex(np.asarray(mu, dtype=complex).ravel()[m])
    if mu_m == 0:
        raise DomainError(f"mu[{m}] is zero; its logarithm is undefined")
    k = np.asarray(k)
    val = np.log(abs(mu_m)) + 1j * (_principal_arg(mu_m) + TWO_PI * k)
    return complex(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ReferenceSpectrum:
    """Eigenvalues ``mu`` of the neutral matrix and the grids they generate."""

    mu: np.ndarray

    def __post_init__(self):
        mu = _frozen(np.ravel(self.mu))
        if mu.size == 0:
            raise DomainError("mu must be non-empty")
        if np.any(mu == 0):
            raise DomainError(f"mu contains zero: {mu.tolist()}")
        if np.unique(mu).size != mu.size:
            raise DomainError(f"mu entries must be pairwise distinct: {mu.tolist()}")
        object.__setattr__(self, "mu", mu)

    @property
    def n(self):
        return self.mu.size

    @property
    def log_abs(self):
        return np.log(np.abs(self.mu))

    @property
    def arg(self):
        return _principal_arg(self.mu)

    def lambda_tilde(self, m, k):
        return reference_grid(self.mu, m, k)

    def beta_tilde(self, m, k):
        lt = np.asarray(self.lambda_tilde(m, k))
        out = np.where(lt == 0, 1.0 + 0j, lt)
        return complex(out) if out.ndim == 0 else out

    def window(self, m, N):
        """Grid values ``lambda_tilde(m, k)`` for ``k = -N..N``."""
        return self.lambda_tilde(m, np.arange(-N, N + 1))

    def nearest(self, lam):
        """Closest grid point to ``lam`` as ``(m, k, value)``."""
        best = None
        for m in range(self.n):
            k = int(np.rint((lam.imag - self.arg[m]) / TWO_PI))
            val = self.lambda_tilde(m, k)
            dist = abs(val - lam)
            if best is None or dist < best[3]:
                best = (m, k, val, dist)
        return best[:3]

    def require_assignable(self):
        """Reject ``mu = 1``; the solver needs every grid point nonzero."""
        if np.any(self.mu == 1):
            raise DomainError("mu = 1 puts a grid point at 0; not supported for assignment")


@dataclass(frozen=True)
class EigenFrame:
    """Left eigen-rows ``Z`` (as columns) and the biorthogonal columns ``Y``.

    ``Z^* Y = I``; the columns ``z_m`` satisfy ``z_m^* A_{-1} = mu_m z_m^*``.
    """

    Z: np.ndarray
    Y: np.ndarray
    sigma_min: float
    sigma_max: float

    @property
    def n(self):
        return self.Z.shape[0]


def biorthogonal_frame(Z):
    """Build the frame ``(Z, Y)`` with ``Y = (Z^*)^{-1}``.

    Raises
    ------
    ConditioningError
        If ``sigma_min(Z) / sigma_max(Z) < 1e-12``.
    """
    Z = np.array(Z, dtype=complex)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise DomainError(f"Z must be square, got shape {Z.shape}")
    s = np.linalg.svd(Z, compute_uv=False)
    if s[0] == 0 or s[-1] / s[0] < FRAME_RCOND:
        ratio = 0.0 if s[0] == 0 else s[-1] / s[0]
        raise ConditioningError(
            f"Z is rank deficient (sigma_min/sigma_max={ratio:.3e})",
            np.inf if ratio == 0 else 1.0 / ratio,
        )
    Y = np.linalg.inv(Z.conj().T)
    return EigenFrame(_frozen(Z), _frozen(Y), float(s[-1]), float(s[0]))


def minus_one_matrix(Z, mu):
    """Matrix whose left eigen-rows are ``z_m^*`` with eigenvalues ``mu_m``."""
    frame = Z if isinstance(Z, EigenFrame) else biorthogonal_frame(Z)
    mu = np.asarray(mu, dtype=complex).ravel()
    if mu.size != frame.n:
        raise DomainError(f"expected {frame.n} eigenvalues, got {mu.size}")
    return (frame.Y * mu) @ frame.Z.conj().T


@dataclass(frozen=True)
class SpectralTarget:
    """Target eigenvalues and left degenerating vectors on a finite window.

    Parameters
    ----------
    reference : ReferenceSpectrum
    frame : EigenFrame
    window : int
        Radius ``N_t``; entries with ``|k| > window`` follow the tail
        convention.
    lam : (n, 2*window+1) complex, optional
        ``lam[m, k + window]``.  Defaults to the reference grid.
    d : (n, 2*window+1, n) complex, optional
        ``d[m, k + window]`` is the vector for ``lam[m, k + window]``.
        Defaults to ``z_m``.
    finite_part : tuple (lam0, d0), optional
        ``lam0`` of shape (J,) and ``d0`` of shape (n, J) (columns are the
        vectors).
    """

    reference: ReferenceSpectrum
    frame: EigenFrame
    window: int
    lam: np.ndarray = None
    d: np.ndarray = None
    finite_part: tuple = None
    coincidence_tol: float = field(default=0.0, repr=False)

    def __post_init__(self):
        n, N = self.reference.n, int(self.window)
        if N < 0:
            raise DomainError("window must be >= 0")
        if self.frame.n != n:
            raise DomainError(f"frame has dimension {self.frame.n}, mu has {n}")
        object.__setattr__(self, "window", N)
        grid = np.array([self.reference.window(m, N) for m in range(n)]).reshape(n, 2 * N + 1)
        lam = grid if self.lam is None else np.array(self.lam, dtype=complex)
        if lam.shape != (n, 2 * N + 1):
            raise DomainError(f"lam must have shape {(n, 2 * N + 1)}, got {lam.shape}")
        if self.d is None:
            d = np.broadcast_to(self.frame.Z.T[:, None, :], (n, 2 * N + 1, n))
        else:
            d = np.array(self.d, dtype=complex)
        if d.shape != (n, 2 * N + 1, n):
            raise DomainError(f"d must have shape {(n, 2 * N + 1, n)}, got {d.shape}")
        object.__setattr__(self, "lam", _frozen(lam))
        object.__setattr__(self, "d", _frozen(d))
        if self.finite_part is not None:
            lam0, d0 = self.finite_part
            lam0 = _frozen(np.ravel(lam0))
            d0 = _frozen(np.reshape(d0, (n, -1)))
            if d0.shape[1] != lam0.size:
                raise DomainError("finite_part: lam0 and d0 sizes differ")
            object.__setattr__(self, "finite_part", (lam0, d0))
        self._validate()

    @property
    def n(self):
        return self.reference.n

    def _validate(self):
        n, N = self.n, self.window
        flat = self.lam.ravel()
        if np.unique(flat).size != flat.size:
            raise DomainError("target eigenvalues must be pairwise distinct")
        norms = np.linalg.norm(self.d, axis=2)
        if np.any(norms == 0):
            m, i = np.argwhere(norms == 0)[0]
            raise DomainError(f"d[{m}, k={i - N}] is the zero vector")
        for m0 in range(n):
            for i, lam in enumerate(self.lam[m0]):
                self._check_coincidence(lam, m0, i - N)
        if self.finite_part is not None:
            lam0, d0 = self.finite_part
            if np.unique(lam0).size != lam0.size:
                raise DomainError("finite-part eigenvalues must be pairwise distinct")
            for j, l0 in enumerate(lam0):
                if np.any(flat == l0):
                    raise DomainError(f"finite-part eigenvalue {l0} repeats a target eigenvalue")
                m, k, val = self.reference.nearest(l0)
                if val == l0 and abs(k) > N:
                    raise DomainError(
                        f"finite-part eigenvalue {l0} equals tail grid point ({m}, {k})"
                    )
            if d0.shape[1] and np.linalg.matrix_rank(d0) < d0.shape[1]:
                raise DomainError("finite-part vectors d0 are linearly dependent")

    def _check_coincidence(self, lam, m0, k0):
        m, k, val = self.reference.nearest(lam)
        tol = self.coincidence_tol * max(1.0, abs(lam))
        if abs(val - lam) <= tol and (m, k) != (m0, k0):
            raise DomainError(
                f"target ({m0}, {k0}) = {lam} coincides with grid point ({m}, {k}); "
                "only the same index may coincide"
            )

    def lam_at(self, m, k):
        if abs(k) > self.window:
            return self.reference.lambda_tilde(m, k)
        return complex(self.lam[m, k + self.window])

    def d_at(self, m, k):
        if abs(k) > self.window:
            return np.array(self.frame.Z[:, m])
        return np.array(self.d[m, k + self.window])

    def lam_window(self, m, N):
        """Targets for channel ``m`` on ``|k| <= N`` with the tail applied."""
        out = self.reference.window(m, N).astype(complex)
        w = min(N, self.window)
        out[N - w:N + w + 1] = self.lam[m, self.window - w:self.window + w + 1]
        return out

    def d_window(self, m, N):
        out = np.tile(self.frame.Z[:, m], (2 * N + 1, 1)).astype(complex)
        w = min(N, self.window)
        out[N - w:N + w + 1] = self.d[m, self.window - w:self.window + w + 1]
        return out

    def replace(self, **changes):
        kw = dict(reference=self.reference, frame=self.frame, window=self.window,
                  lam=self.lam, d=self.d, finite_part=self.finite_part,
                  coincidence_tol=self.coincidence_tol)
        kw.update(changes)
        return SpectralTarget(**kw)


def identity_target(reference, frame, window):
    """Target equal to the reference grid with ``d = z_m``."""
    return SpectralTarget(reference, frame, window)


@dataclass(frozen=True)
class AlphaTable:
    """Row coordinates of the target vectors in the basis ``{z_m^*}``.

    ``coef[m0, k0 + window, m]`` is ``alpha(m, m0, k0)`` with
    ``d(m0, k0)^* = sum_m alpha(m, m0, k0) z_m^*``.
    """

    window: int
    coef: np.ndarray

    @property
    def n(self):
        return self.coef.shape[0]

    def at(self, m, m0, k0):
        if abs(k0) > self.window:
            return 1.0 + 0j if m == m0 else 0j
        return complex(self.coef[m0, k0 + self.window, m])

    def block(self, m, m0, N):
        """``alpha(m, m0, k0)`` for ``k0 = -N..N`` with the tail applied."""
        out = np.full(2 * N + 1, 1.0 + 0j if m == m0 else 0j)
        w = min(N, self.window)
        out[N - w:N + w + 1] = self.coef[m0, self.window - w:self.window + w + 1, m]
        return out

    def vectors(self, frame):
        """Rebuild ``d(m0, k0)`` from the coordinates."""
        # d^* = alpha^T Z^*  =>  d = Z conj(alpha)
        return np.einsum("im,akm->aki", frame.Z, self.coef.conj())


def alpha_decompose(target, frame=None):
    """Coordinates ``alpha(m, m0, k0) = d(m0, k0)^* y_m`` on the target window."""
    frame = target.frame if frame is None else frame
    coef = np.einsum("aki,im->akm", target.d.conj(), frame.Y)
    coef.setflags(write=False)
    return AlphaTable(target.window, coef)


@dataclass(frozen=True)
class ClosenessReport:
    sum_lambda: np.ndarray
    sum_vec: np.ndarray
    sum_alpha_off: np.ndarray
    sum_alpha_diag: np.ndarray
    threshold: float
    flagged: tuple

    def to_dict(self):
        return {
            "sum_lambda": self.sum_lambda.tolist(),
            "sum_vec": self.sum_vec.tolist(),
            "sum_alpha_off": self.sum_alpha_off.tolist(),
            "sum_alpha_diag": self.sum_alpha_diag.tolist(),
            "threshold": self.threshold,
            "flagged": list(self.flagged),
        }


def closeness_report(target, reference=None, frame=None, threshold=SOLVABILITY_WARNING):
    """Finite-window sums measuring closeness of the target to the reference.

    ``sum_alpha_off[m, m0]`` holds the off-diagonal sums (zero on the
    diagonal).  Channels whose ``sum_vec`` exceeds ``threshold`` are listed in
    ``flagged``.
    """
    reference = target.reference if reference is None else reference
    frame = target.frame if frame is None else frame
    n, N = target.n, target.window
    grid = np.array([reference.window(m, N) for m in range(n)]).reshape(n, 2 * N + 1)
    sum_lambda = np.sum(np.abs(target.lam - grid) ** 2, axis=1)
    sum_vec = np.sum(np.linalg.norm(target.d - frame.Z.T[:, None, :], axis=2) ** 2, axis=1)
    alpha = alpha_decompose(target, frame).coef
    # sq[m, m0] = sum_k |alpha(m, m0, k) - delta|^2
    sq = np.sum(np.abs(alpha - np.eye(n)[:, None, :]) ** 2, axis=1).T
    off = sq * (1 - np.eye(n))
    flagged = tuple(int(m) for m in np.nonzero(sum_vec > threshold)[0])
    return ClosenessReport(sum_lambda, sum_vec, off, np.diag(sq).copy(), threshold, flagged)
