import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neutralspec import fixtures as fx
from neutralspec.assignment import (
    assemble_D,
    finite_part_matrix,
    finite_part_posttransform,
    finite_part_pretransform,
    invertibility_diagnostics,
    lemma2_adjust,
    s_entry,
    solve_assignment,
    spectral_equation_residual,
)
from neutralspec.charmatrix import SystemRealization, delta_eval
from neutralspec.errors import AdjustmentFailed, DomainError, SolverSingular
from neutralspec.reconstruct import p_to_realization
from neutralspec.spectral import (
    ReferenceSpectrum,
    SpectralTarget,
    alpha_decompose,
    biorthogonal_frame,
)


def single_shift(mu=2.0, delta=0.1, window=1):
    ref = ReferenceSpectrum([mu])
    frame = biorthogonal_frame([[1.0]])
    lam = ref.window(0, window)[None, :].copy()
    lam[0, window] += delta
    return SpectralTarget(ref, frame, window, lam=lam)


def test_s_entry_values():
    tg = single_shift()
    ref = tg.reference
    # own index, shifted by delta: 1 / (-delta)
    assert s_entry(ref, tg, 0, 0, 0, 0) == pytest.approx(-10.0)
    assert s_entry(ref, tg, 0, 0, 1, 0) == pytest.approx(1 / (2j * np.pi - 0.1))
    with pytest.raises(DomainError, match="scaled limit"):
        s_entry(ref, fx.identity_problem(mu=[2.0], window=0), 0, 0, 0, 0)


def test_s_entry_rejects_foreign_coincidence():
    # validated targets cannot contain one, so use a bare stand-in
    ref = ReferenceSpectrum([2.0, -3.0])

    class Stub:
        def lam_at(self, m0, k0):
            return ref.lambda_tilde(1, 4)

    with pytest.raises(DomainError, match=r"grid point \(1, 4\)"):
        s_entry(ref, Stub(), 1, 0, 4, 2)


def test_assemble_identity_one_channel():
    tg = fx.identity_problem(mu=[2.0], window=2)
    op = assemble_D(0, tg.reference, tg, alpha_decompose(tg), 4)
    np.testing.assert_array_equal(op.matrix, np.eye(9))
    np.testing.assert_array_equal(op.rhs, 0)


def test_assemble_identity_two_channels_block_structure():
    tg = fx.identity_problem(window=2)
    alpha = alpha_decompose(tg)
    op = assemble_D(0, tg.reference, tg, alpha, 3)
    # own row block: coincidence rows (identity); off-channel unknowns vanish
    np.testing.assert_array_equal(op.block(0, 0), np.eye(7))
    np.testing.assert_array_equal(op.block(0, 1), 0)
    np.testing.assert_array_equal(op.block(1, 0), 0)
    S = op.block(1, 1)
    lt = tg.reference.window(0, 3)
    lam = tg.reference.window(1, 3)
    np.testing.assert_allclose(S, 1 / (lt[None, :] - lam[:, None]))
    assert op.row_labels[7] == (1, -3) and op.col_labels[8] == (1, -2)


def test_assemble_single_shift_by_hand():
    tg = single_shift()
    op = assemble_D(0, tg.reference, tg, alpha_decompose(tg), 1)
    lt = tg.reference.window(0, 1)
    lam0 = tg.lam_at(0, 0)
    expected = np.eye(3, dtype=complex)
    expected[1] = (lt[1] - lam0) / (lt - lam0)
    np.testing.assert_allclose(op.matrix, expected)
    np.testing.assert_allclose(op.rhs, [0, lt[1] - lam0, 0])


def test_identity_solution_is_zero():
    tg = fx.identity_problem(window=3)
    sol = solve_assignment(tg.reference, tg.frame, tg, 6)
    assert np.all(sol.p == 0)
    assert np.all(sol.residuals == 0)


def test_single_shift_substitution_and_stability():
    tg = single_shift(window=0)
    ref, frame = tg.reference, tg.frame
    sol8 = solve_assignment(ref, frame, tg, 8)
    r = spectral_equation_residual(sol8, ref, frame, tg.lam_at(0, 0), tg.d_at(0, 0))
    assert r.max() <= 1e-10
    sol16 = solve_assignment(ref, frame, tg, 16)
    for k in range(-4, 5):
        assert abs(sol8.coeff(k, 0, 0) - sol16.coeff(k, 0, 0)) <= 1e-6
    assert sol8.coeff(20, 0, 0) == 0


def test_solve_window_precondition():
    tg = fx.shifted_problem(window=3)
    with pytest.raises(DomainError):
        solve_assignment(tg.reference, tg.frame, tg, 5)
    ref = ReferenceSpectrum([1.0])
    with pytest.raises(DomainError):
        solve_assignment(ref, biorthogonal_frame([[1.0]]),
                         SpectralTarget(ref, biorthogonal_frame([[1.0]]), 0), 2)


@pytest.mark.parametrize("Z", [None, [[1.0, 0.3j], [0.2, 1.0]]])
def test_shifted_fixture_substitution_oracle(Z):
    tg = fx.shifted_problem(Z=Z)
    ref, frame = tg.reference, tg.frame
    sol = solve_assignment(ref, frame, tg, 24, parallel=True)
    worst = 0.0
    for m0 in range(2):
        for k in range(-10, 11):
            r = spectral_equation_residual(sol, ref, frame, tg.lam_at(m0, k), tg.d_at(m0, k))
            worst = max(worst, r.max())
    assert worst <= 1e-9
    assert np.all(sol.conditions < 100)


def test_solution_realizes_every_window_target():
    # truncated solve + exact reconstruction: each |k| <= N_s target is exact
    tg = fx.shifted_problem()
    sol = solve_assignment(tg.reference, tg.frame, tg, 12, keep_operators=True)
    sys = p_to_realization(sol, tg.frame, tg.reference)
    assert len(sol.operators) == 2
    for m0 in range(2):
        for k in (-12, -6, 0, 3, 12):
            D = delta_eval(sys, tg.lam_at(m0, k))
            s = np.linalg.svd(D, compute_uv=False)
            assert s[-1] / s[0] < 1e-13


def test_invertibility_identity_and_eps():
    tg = fx.identity_problem(mu=[2.0, 3.0], window=2)
    rep = invertibility_diagnostics(0, tg.reference, tg, 8)
    assert rep.sigma[0] == pytest.approx((1.0, 1.0))
    np.testing.assert_allclose(rep.eps[1], 2 / 3 - 1)
    assert rep.flagged == ()
    assert set(rep.to_dict()) >= {"sigma", "min_abs_eps", "q_range"}


def test_invertibility_q_at_shift():
    delta = 0.1
    tg = single_shift(delta=delta, window=0)
    rep = invertibility_diagnostics(0, tg.reference, tg, 4)
    # q = (mu e^{-lam} - 1) / (lt - lam) with lam = lt + delta
    assert rep.q[4] == pytest.approx((1 - np.exp(-delta)) / delta)
    assert rep.q[0] == 1
    # shifting the other way gives (e^delta - 1) / delta ~ 1 + delta/2
    back = invertibility_diagnostics(0, tg.reference, single_shift(delta=-delta, window=0), 4)
    assert back.q[4] == pytest.approx(np.expm1(delta) / delta)


def test_invertibility_flags_small_eps():
    # mu_0 e^{-lam} = 1 for a channel-1 target placed on channel 0's grid line
    ref = ReferenceSpectrum([2.0, -3.0])
    frame = biorthogonal_frame(np.eye(2))
    lam = np.array([ref.window(m, 1) for m in range(2)])
    lam[1, 1] = np.log(2) + 2j * np.pi * 7 + 1e-9
    tg = SpectralTarget(ref, frame, 1, lam=lam)
    assert (1, 0) in invertibility_diagnostics(0, ref, tg, 2).flagged


def test_lemma2_noop_and_failure():
    tg = fx.shifted_problem(window=2)
    alpha = alpha_decompose(tg)
    out = lemma2_adjust(alpha, tg, tg.reference, 1e-2, seed=0, N=2)
    assert out.retries == 0 and out.alpha is alpha and out.delta_norm == 0
    bad = fx.singular_problem()
    with pytest.raises(AdjustmentFailed):
        lemma2_adjust(alpha_decompose(bad), bad, bad.reference, 0.0, seed=0, N=2)


def test_singular_fixture_is_singular():
    bad = fx.singular_problem()
    with pytest.raises(SolverSingular) as err:
        solve_assignment(bad.reference, bad.frame, bad, 8)
    assert err.value.channel == 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_lemma2_repair_properties(seed):
    bad = fx.singular_problem()
    alpha = alpha_decompose(bad)
    eps = 1e-2
    out = lemma2_adjust(alpha, bad, bad.reference, eps, seed=seed, N=1, N_s=8)
    delta = out.alpha.coef - alpha.coef
    # support only on |k0| <= N, total squared size eps/2
    assert np.all(delta[:, :1] == 0) and np.all(delta[:, -1:] == 0)
    assert out.delta_norm == pytest.approx(eps / 2)
    assert out.delta_norm < eps
    assert np.all(out.conditions <= 1e8)
    again = lemma2_adjust(alpha, bad, bad.reference, eps, seed=seed, N=1, N_s=8)
    np.testing.assert_array_equal(again.alpha.coef, out.alpha.coef)


def test_finite_part_matrix():
    C = finite_part_matrix([-1.0, -2.0], np.eye(2))
    np.testing.assert_allclose(C, np.diag([-1.0, -2.0]))
    rng = np.random.default_rng(3)
    D0 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    lam0 = np.array([-1.0, 2j, 0.5])
    C = finite_part_matrix(lam0, D0)
    for j in range(3):
        np.testing.assert_allclose(D0[:, j].conj() @ C, lam0[j] * D0[:, j].conj(), atol=1e-12)
    with pytest.raises(DomainError):
        finite_part_matrix([1.0, 2.0], np.ones((2, 2)))


def test_pretransform_vectors():
    tg = fx.finite_part_problem(window=2)
    fpt = finite_part_pretransform(tg)
    C = fpt.C
    lam = tg.lam_at(0, 1)
    f = fpt.target.d_at(0, 1)
    d = tg.d_at(0, 1)
    # f^* = d^* (I - C/lam)
    np.testing.assert_allclose(f.conj(), d.conj() @ (np.eye(2) - C / lam))
    # e_1 at ln 2 with C = diag(-1, -2)
    base = fx.identity_problem(window=0).replace(finite_part=([-1.0, -2.0], np.eye(2)))
    f0 = finite_part_pretransform(base).target.d_at(0, 0)
    np.testing.assert_allclose(f0, [1 + 1 / np.log(2), 0])
    assert fpt.M_bound >= np.linalg.norm(C, 2)
    with pytest.raises(DomainError):
        finite_part_pretransform(fx.shifted_problem(window=1))


def test_posttransform_examples():
    hat = SystemRealization.unperturbed(np.diag([2.0, 3.0]))
    assert finite_part_posttransform(hat, np.zeros((2, 2))) is hat
    C = np.diag([-1.0, -2.0])
    sys = finite_part_posttransform(hat, C)
    assert not sys.canonical
    D = delta_eval(sys, -1.0)
    np.testing.assert_allclose(np.array([1, 0]) @ D, 0, atol=1e-13)
    for lam in (0.3 + 2j, -1.7 + 9j):
        expected = (np.eye(2) - C / lam) @ (lam * (np.eye(2) - np.exp(-lam) * hat.A_minus1))
        np.testing.assert_allclose(delta_eval(sys, lam), expected, atol=1e-12)


def test_posttransform_chain_identity():
    # d^* Delta(lam) = f^* Delta_hat(lam) for every target
    tg = fx.finite_part_problem(window=3)
    fpt = finite_part_pretransform(tg)
    sol = solve_assignment(tg.reference, tg.frame, fpt.target, 12)
    hat = p_to_realization(sol, tg.frame, tg.reference)
    sys = finite_part_posttransform(hat, fpt.C)
    for m in range(2):
        for k in range(-3, 4):
            lam = tg.lam_at(m, k)
            lhs = tg.d_at(m, k).conj() @ delta_eval(sys, lam)
            rhs = fpt.target.d_at(m, k).conj() @ delta_eval(hat, lam)
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)
