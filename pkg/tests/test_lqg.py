import mpmath
import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st
from scipy.optimize import linear_sum_assignment

from bicopter_lqg.integrator import IntegratorConfig, integrate_adaptive
from bicopter_lqg.linear_model import LinearModel
from bicopter_lqg.lqg import (ClosedLoopUnstable, KSynthesis, Mode, control_law, export_gains,
                              filter_process_cov, linear_closed_loop, observer_derivative, synthesize)
from bicopter_lqg.riccati import spectral_abscissa

I12, I4 = np.eye(12), np.eye(4)
DEFAULT_WEIGHTS = (700 * I12, 1e-3 * I4, 0.01 * I12, 10 * I12)


@pytest.fixture(scope="module")
def pf(model):
    return synthesize(model, *DEFAULT_WEIGHTS, KSynthesis.PAPER_FAITHFUL)


@pytest.fixture(scope="module")
def sep(model):
    return synthesize(model, *DEFAULT_WEIGHTS, KSynthesis.SEPARATION)


def hp_eigvals(M, digits=40):
    with mpmath.workdps(digits):
        E, _ = mpmath.eig(mpmath.matrix(M.tolist()))
        return np.array([complex(z) for z in E])


def max_matching_gap(a, b):
    D = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(D)
    return D[r, c].max()


def test_error_injected_design_is_doubly_hurwitz(pf):
    assert spectral_abscissa(pf.regulator_matrix()) < 0
    assert spectral_abscissa(pf.observer_matrix()) < 0
    assert np.all(np.isfinite(pf.K)) and np.all(np.isfinite(pf.L))


def test_synthesis_modes_differ_but_both_stabilize(pf, sep, model):
    assert np.abs(pf.K - sep.K).max() > 1e-3 * np.abs(sep.K).max()
    for ctl in (pf, sep):
        assert spectral_abscissa(model.A - model.B @ ctl.K) < 0
        A_cl, _ = linear_closed_loop(ctl)
        assert spectral_abscissa(A_cl) < 0


def test_residuals_are_recorded(pf):
    assert 0 < pf.k_residual < 1e-8 * np.linalg.norm(700 * I12)
    assert pf.l_residual < 1e-8


def test_lqr_mode_uses_the_plain_regulator(model, sep):
    ctl = synthesize(model, *DEFAULT_WEIGHTS, KSynthesis.PAPER_FAITHFUL, mode=Mode.LQR_ONLY)
    assert ctl.k_synthesis is KSynthesis.SEPARATION
    np.testing.assert_array_equal(ctl.K, sep.K)


def test_degenerate_identity_weights(model):
    ctl = synthesize(model, I12, I4, I12, I12, KSynthesis.SEPARATION)
    assert np.all(np.isfinite(ctl.K)) and np.all(np.isfinite(ctl.L))


def test_filter_covariance_readings():
    W = 0.01 * I12
    np.testing.assert_allclose(filter_process_cov(W, "paper"), 1e-6 * I12)
    np.testing.assert_array_equal(filter_process_cov(W, "identity"), W)
    with pytest.raises(ValueError):
        filter_process_cov(W, "other")


def test_unstable_design_is_rejected(model):
    with pytest.raises(ClosedLoopUnstable):
        synthesize(model, *DEFAULT_WEIGHTS, KSynthesis.PAPER_FAITHFUL, noise_input="identity")


def test_observer_without_innovation(pf, model):
    x = np.linspace(-1, 1, 12)
    d = observer_derivative(x, model.u_eq, model.C @ x, pf)
    np.testing.assert_allclose(d, model.A @ x, atol=1e-12)


def test_observer_with_zero_gain_predicts(pf, model):
    ctl = type(pf)(pf.K, np.zeros((12, 12)), model)
    x, u = np.ones(12), model.u_eq + [0.1, 0.0, 0.01, 0.0]
    d = observer_derivative(x, u, np.zeros(12), ctl)
    np.testing.assert_allclose(d, model.A @ x + model.B @ (u - model.u_eq))


def test_estimation_error_decays_at_the_observer_rate(pf):
    Ao = pf.observer_matrix()
    lam = spectral_abscissa(Ao)
    vals, vecs = np.linalg.eig(Ao)
    kappa = np.linalg.cond(vecs)
    e0 = np.ones(12)
    res = integrate_adaptive(lambda t, e: Ao @ e, e0, (0.0, 1500.0),
                             IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14, h_max=1.0), sample_dt=5.0)
    norms = np.linalg.norm(res.x, axis=1)
    bound = kappa * np.linalg.norm(e0) * np.exp(lam * res.t)
    assert np.all(norms <= bound * (1 + 1e-6))
    tail = res.t > 750
    slope = np.polyfit(res.t[tail], np.log(norms[tail]), 1)[0]
    assert slope == pytest.approx(lam, rel=0.05)


def test_control_at_reference_is_hover(pf, model):
    x = np.linspace(0, 1, 12)
    np.testing.assert_array_equal(control_law(x, x, pf), model.u_eq)


def test_zero_gain_control(pf, model):
    ctl = type(pf)(np.zeros((4, 12)), pf.L, model)
    np.testing.assert_array_equal(control_law(np.ones(12), np.zeros(12), ctl), model.u_eq)


def test_altitude_error_is_opposed(pf, model):
    # positive z error needs more thrust, since zdd = g - u1/m
    x = np.zeros(12)
    x[4] = 0.1
    u = control_law(x, np.zeros(12), pf)
    assert u[0] > model.u_eq[0]
    x[4] = -0.1
    assert control_law(x, np.zeros(12), pf)[0] < model.u_eq[0]


def test_separation_spectrum_on_hover_model(sep):
    # x and y give A - LC repeated eigenvalues and ||A_cl|| ~ 2e6, which
    # puts double-precision eigenvalues ~1e-4 off; use 40 digits instead
    A_cl, _ = linear_closed_loop(sep)
    union = np.concatenate([hp_eigvals(sep.regulator_matrix()), hp_eigvals(sep.observer_matrix())])
    assert max_matching_gap(hp_eigvals(A_cl), union) < 1e-6


@given(st.integers(0, 2**31 - 1))
def test_separation_spectrum_on_random_systems(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 2
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    model = LinearModel(A, B, np.eye(n), np.zeros((n, m)), np.zeros(m))
    ctl = synthesize(model, np.eye(n), np.eye(m), np.eye(n), np.eye(n), KSynthesis.SEPARATION,
                     noise_input="identity")
    A_cl, _ = linear_closed_loop(ctl)
    union = np.concatenate([np.linalg.eigvals(ctl.regulator_matrix()), np.linalg.eigvals(ctl.observer_matrix())])
    assert max_matching_gap(np.linalg.eigvals(A_cl), union) < 1e-6 * max(1.0, np.abs(union).max())


def test_error_dynamics_identity(pf, model):
    # e = x - x_hat obeys e' = (A - LC) e + w - L v for any state and noise
    A_cl, B_n = linear_closed_loop(pf)
    T = np.hstack([I12, -I12])
    np.testing.assert_allclose(T @ A_cl, pf.observer_matrix() @ T, atol=1e-9 * np.abs(A_cl).max())
    np.testing.assert_allclose(T @ B_n, np.hstack([I12, -pf.L]), atol=0)


@given(st.integers(0, 2**31 - 1))
def test_error_dynamics_along_random_states(seed):
    rng = np.random.default_rng(seed)
    from bicopter_lqg.linear_model import build_linear_model
    from bicopter_lqg.plant import BicopterParams
    model = build_linear_model(BicopterParams())
    ctl = synthesize(model, *DEFAULT_WEIGHTS, KSynthesis.SEPARATION)
    x, x_hat, w, v = (rng.standard_normal(12) for _ in range(4))
    u = control_law(x_hat, np.zeros(12), ctl)
    x_dot = model.A @ x + model.B @ (u - model.u_eq) + w
    xh_dot = observer_derivative(x_hat, u, model.C @ x + v, ctl)
    e = x - x_hat
    expected = ctl.observer_matrix() @ e + w - ctl.L @ v
    np.testing.assert_allclose(x_dot - xh_dot, expected, atol=1e-9 * max(1.0, np.abs(x_dot).max()))


def test_lqr_closed_loop_is_plant_only(model):
    ctl = synthesize(model, *DEFAULT_WEIGHTS, mode=Mode.LQR_ONLY)
    A_cl, B_n = linear_closed_loop(ctl)
    assert A_cl.shape == (12, 12)
    np.testing.assert_array_equal(B_n, I12)


def test_gains_export(pf, tmp_path):
    paths = export_gains(pf, tmp_path)
    assert [p.name for p in paths] == ["K.txt", "L.txt"]
    np.testing.assert_array_equal(np.loadtxt(paths[0]), pf.K)


def test_with_mode_keeps_gains(pf):
    other = pf.with_mode(Mode.LQR_ONLY)
    assert other.mode is Mode.LQR_ONLY and other.K is pf.K


def test_observer_gain_matches_scipy(pf, model):
    P = sla.solve_continuous_are(model.A.T, model.C.T, 1e-6 * I12, 10 * I12)
    L_ref = P @ model.C.T / 10.0
    np.testing.assert_allclose(pf.L, L_ref, rtol=1e-6, atol=1e-9)
