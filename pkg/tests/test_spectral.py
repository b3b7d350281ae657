import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neutralspec import fixtures as fx
from neutralspec.errors import ConditioningError, DomainError
from neutralspec.spectral import (
    ReferenceSpectrum,
    SpectralTarget,
    alpha_decompose,
    biorthogonal_frame,
    closeness_report,
    identity_target,
    minus_one_matrix,
    reference_grid,
)


def test_reference_grid_positive_real():
    assert reference_grid([2.0], 0, 0) == pytest.approx(np.log(2))
    assert reference_grid([2.0], 0, 3) == pytest.approx(np.log(2) + 6j * np.pi)


def test_reference_grid_negative_real_uses_pi():
    # Arg(-3) = pi on the principal branch (-pi, pi]
    val = reference_grid([2.0, -3.0], 1, 0)
    assert val == pytest.approx(np.log(3) + 1j * np.pi)
    # a negative-zero imaginary part must not flip to -pi
    assert reference_grid([complex(-3.0, -0.0)], 0, 0).imag == pytest.approx(np.pi)


def test_reference_grid_vectorized():
    ks = np.arange(-2, 3)
    vals = reference_grid([1j], 0, ks)
    np.testing.assert_allclose(vals.imag, np.pi / 2 + 2 * np.pi * ks)
    np.testing.assert_allclose(vals.real, 0, atol=1e-16)


def test_reference_grid_rejects_zero():
    with pytest.raises(DomainError):
        reference_grid([0.0], 0, 0)


def test_reference_spectrum_validation():
    with pytest.raises(DomainError):
        ReferenceSpectrum([1.0, 1.0])
    with pytest.raises(DomainError):
        ReferenceSpectrum([2.0, 0.0])
    with pytest.raises(DomainError):
        ReferenceSpectrum([1.0]).require_assignable()
    ReferenceSpectrum([1.0])  # legal as a reference, just not assignable


def test_beta_tilde_replaces_zero_point():
    ref = ReferenceSpectrum([1.0, 2.0])
    assert ref.beta_tilde(0, 0) == 1.0
    assert ref.beta_tilde(0, 1) == pytest.approx(2j * np.pi)


def test_nearest():
    ref = ReferenceSpectrum([2.0, -3.0])
    m, k, val = ref.nearest(np.log(3) + 1j * (np.pi + 4 * np.pi) + 0.01)
    assert (m, k) == (1, 2)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 5))
def test_biorthogonal_frame_property(seed, n):
    rng = np.random.default_rng(seed)
    Z = np.eye(n) + 0.4 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    frame = biorthogonal_frame(Z)
    np.testing.assert_allclose(frame.Z.conj().T @ frame.Y, np.eye(n), atol=1e-10)
    mu = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    A = minus_one_matrix(frame, mu)
    # z_m^* A = mu_m z_m^*
    np.testing.assert_allclose(frame.Z.conj().T @ A, mu[:, None] * frame.Z.conj().T,
                               atol=1e-9 * np.abs(mu).max())


def test_frame_rejects_rank_deficient():
    with pytest.raises(ConditioningError) as err:
        biorthogonal_frame([[1, 2], [2, 4]])
    assert err.value.condition > 1e12


def test_target_defaults_to_reference():
    tg = fx.identity_problem(window=3)
    np.testing.assert_array_equal(tg.lam[1], tg.reference.window(1, 3))
    np.testing.assert_array_equal(tg.d[0, 2], tg.frame.Z[:, 0])
    # tail convention
    assert tg.lam_at(0, 7) == tg.reference.lambda_tilde(0, 7)
    np.testing.assert_array_equal(tg.d_at(1, -9), tg.frame.Z[:, 1])


def test_target_window_views():
    tg = fx.shifted_problem(window=2)
    lam = tg.lam_window(0, 4)
    assert lam.shape == (9,)
    assert lam[0] == tg.reference.lambda_tilde(0, -4)
    assert lam[4] == tg.lam_at(0, 0)
    assert tg.d_window(1, 4).shape == (9, 2)


def test_target_validation_errors():
    ref = ReferenceSpectrum([2.0, -3.0])
    frame = biorthogonal_frame(np.eye(2))
    lam = np.array([ref.window(m, 1) for m in range(2)])
    dup = lam.copy()
    dup[0, 0] = dup[0, 1]
    with pytest.raises(DomainError, match="distinct"):
        SpectralTarget(ref, frame, 1, lam=dup)
    d = np.broadcast_to(np.eye(2)[:, None, :], (2, 3, 2)).copy()
    d[1, 2] = 0
    with pytest.raises(DomainError, match="zero vector"):
        SpectralTarget(ref, frame, 1, d=d)
    cross = lam.copy()
    cross[0, 1] = ref.lambda_tilde(1, 5)
    with pytest.raises(DomainError, match="coincides"):
        SpectralTarget(ref, frame, 1, lam=cross)
    with pytest.raises(DomainError):
        SpectralTarget(ref, frame, 1, lam=lam[:, :2])


def test_finite_part_validation():
    tg = fx.shifted_problem(window=2)
    with pytest.raises(DomainError, match="repeats"):
        tg.replace(finite_part=([tg.lam_at(0, 1), -2.0], np.eye(2)))
    with pytest.raises(DomainError, match="dependent"):
        tg.replace(finite_part=([-1.0, -2.0], np.ones((2, 2))))
    with pytest.raises(DomainError, match="tail"):
        tg.replace(finite_part=([tg.reference.lambda_tilde(0, 9), -2.0], np.eye(2)))


def test_alpha_identity_is_kronecker():
    tg = identity_target(ReferenceSpectrum([2.0, -3.0]),
                         biorthogonal_frame([[1, 0.3], [0.2, 1]]), 2)
    alpha = alpha_decompose(tg)
    expected = np.broadcast_to(np.eye(2)[:, None, :], alpha.coef.shape)
    np.testing.assert_allclose(alpha.coef, expected, atol=1e-15)
    assert alpha.at(0, 0, 10) == 1 and alpha.at(1, 0, 10) == 0
    np.testing.assert_array_equal(alpha.block(1, 1, 4)[:2], [1, 1])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_alpha_roundtrip_reconstructs_vectors(seed):
    rng = np.random.default_rng(seed)
    n, N = 3, 2
    ref = ReferenceSpectrum(rng.standard_normal(n) + 2 + 1j * rng.standard_normal(n))
    Z = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    frame = biorthogonal_frame(Z)
    d = rng.standard_normal((n, 2 * N + 1, n)) + 1j * rng.standard_normal((n, 2 * N + 1, n))
    tg = SpectralTarget(ref, frame, N, d=d)
    np.testing.assert_allclose(alpha_decompose(tg).vectors(frame), d, atol=1e-10)


def test_closeness_report():
    ident = closeness_report(fx.identity_problem(window=3))
    assert np.all(ident.sum_lambda == 0) and np.all(ident.sum_vec == 0)
    assert ident.flagged == ()
    rep = closeness_report(fx.shifted_problem())
    ks = np.arange(-6, 7)
    expected = np.sum((0.2 / (1 + ks ** 2)) ** 2 * 0.5)
    np.testing.assert_allclose(rep.sum_lambda, expected)
    np.testing.assert_allclose(rep.sum_vec, np.sum((0.05 / (1 + np.abs(ks))) ** 2))
    assert rep.sum_alpha_off[0, 0] == 0
    assert rep.to_dict()["threshold"] == 0.25
