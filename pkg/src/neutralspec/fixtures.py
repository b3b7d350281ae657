"""Reproducible problem fixtures used by the tests, benchmarks and examples."""
from __future__ import annotations

import numpy as np

from .charmatrix import MatrixFunctionRep, SystemRealization
from .spectral import ReferenceSpectrum, SpectralTarget, biorthogonal_frame, minus_one_matrix

MU_DEFAULT = (2.0, -3.0)


def identity_problem(mu=MU_DEFAULT, Z=None, window=4):
    """Targets equal to the reference grid with ``d = z_m``."""
    mu = np.asarray(mu, dtype=complex)
    Z = np.eye(mu.size) if Z is None else Z
    return SpectralTarget(ReferenceSpectrum(mu), biorthogonal_frame(Z), window)


def shifted_problem(mu=MU_DEFAULT, Z=None, window=6, shift=0.2, tilt=0.05):
    """Two-channel perturbed targets.

    ``lam(m, k) = lt(m, k) + shift / (1 + k^2) * (1 + i) / 2`` and
    ``d(m, k) = z_m + tilt / (1 + |k|) * z_{1-m}``.
    """
    mu = np.asarray(mu, dtype=complex)
    n = mu.size
    if n != 2:
        raise ValueError("shifted_problem is defined for two channels")
    Z = np.eye(n) if Z is None else np.asarray(Z, dtype=complex)
    ref = ReferenceSpectrum(mu)
    frame = biorthogonal_frame(Z)
    ks = np.arange(-window, window + 1)
    lam = np.array([ref.window(m, window) + shift / (1 + ks ** 2) * (1 + 1j) / 2
                    for m in range(n)])
    w = tilt / (1 + np.abs(ks))
    d = np.array([Z[:, m][None, :] + w[:, None] * Z[:, 1 - m][None, :] for m in range(n)])
    return SpectralTarget(ref, frame, window, lam=lam, d=d)


def finite_part_problem(lam0=(-1.0, -2.0), **kwargs):
    """:func:`shifted_problem` plus finite-part pairs ``(lam0_j, e_j)``."""
    base = shifted_problem(**kwargs)
    lam0 = np.asarray(lam0, dtype=complex)
    return base.replace(finite_part=(lam0, np.eye(base.n)))


def singular_problem(mu=MU_DEFAULT, window=2):
    """Targets whose coordinate table makes a block operator exactly singular.

    Channel 0 keeps its grid point at ``k = 0`` but with the vector ``z_1``,
    so ``alpha(0, 0, 0) = 0`` and the scaled diagonal row of ``D_0`` that
    carries this target vanishes together with its coupling row.
    """
    ref = ReferenceSpectrum(np.asarray(mu, dtype=complex))
    frame = biorthogonal_frame(np.eye(2))
    d = np.broadcast_to(frame.Z.T[:, None, :], (2, 2 * window + 1, 2)).copy()
    d[0, window] = frame.Z[:, 1]
    return SpectralTarget(ref, frame, window, d=d)


def random_system(rng, n=2, terms=2, scale=0.3):
    """Random system with exponential-polynomial kernels (for identity checks)."""
    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    mu = cplx(n)
    Z = np.eye(n) + 0.3 * cplx(n, n)
    A = minus_one_matrix(Z, mu)

    def rep():
        return MatrixFunctionRep(n, scale * cplx(n, n), scale * cplx(n, n),
                                 cplx(terms), scale * cplx(terms, n, n))

    return SystemRealization(A, rep(), rep())
