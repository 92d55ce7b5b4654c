"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

The lines are printed as they happen (visible with ``-s``) and repeated in
the terminal summary of every run.
"""

import math
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from bicopter_lqg.integrator import integrate_rk4
from bicopter_lqg.linear_model import build_linear_model, controllability_rank, observability_rank
from bicopter_lqg.lqg import KSynthesis, Mode, linear_closed_loop, synthesize
from bicopter_lqg.plant import (TABLE_PAYLOAD, BicopterParams, RotorState, actuator_forward, actuator_inverse,
                                apply_payload, hover_input, nonlinear_derivative)
from bicopter_lqg.report import summarize
from bicopter_lqg.riccati import (CareProblem, care_residual, filter_care_residual, kalman_gain, lqr_gain,
                                  solve_care, solve_filter_care, spectral_abscissa)
from bicopter_lqg.scenarios import (Q_VARIANTS, NoiseSpec, altitude_step_scenario, generate_noise, run_scenario,
                                    tracking_scenario)

LINES = []
SEEDS = range(5)


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def params():
    return BicopterParams()


@pytest.fixture(scope="module")
def model(params):
    return build_linear_model(params)


def test_1_payload_inertia_totals(params):
    t0 = time.perf_counter()
    total = apply_payload(params.inertia, TABLE_PAYLOAD)
    elapsed = time.perf_counter() - t0
    got = total.diagonal()
    sig3 = [float(f"{v:.2e}") for v in got]
    ok = sig3 == [3.29e-4, 2.54e-4, 3.18e-4] and elapsed < 1e-3
    assert record("1 payload inertia totals", ok, f"totals {got} in {elapsed * 1e6:.0f} us")


def test_2_riccati(model):
    t0 = time.perf_counter()
    worst, abscissa = 0.0, -math.inf
    R = 1e-3 * np.eye(4)
    for q in Q_VARIANTS:
        Q = q * np.eye(12)
        sol = solve_care(CareProblem(model.A, model.B, Q, R))
        worst = max(worst, care_residual(model.A, model.B, Q, R, sol.P) / np.linalg.norm(Q))
        abscissa = max(abscissa, spectral_abscissa(model.A - model.B @ sol.gain))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and abscissa < 0 and elapsed < 1.0
    assert record("2 Riccati", ok, f"max residual/||Q|| {worst:.2e}, max Re eig(A-BK) {abscissa:.4g}, "
                                   f"{elapsed:.2f} s")


def well_posed(A, B, Q, R):
    try:
        P = sla.solve_continuous_are(A, B, Q, R)
    except (np.linalg.LinAlgError, ValueError):
        return False
    return bool(np.all(np.isfinite(P)) and np.linalg.norm(P) <= 1e4)


def test_3_kalman(model):
    W, V = 0.01 * np.eye(12), 10 * np.eye(12)
    sol = solve_filter_care(model.A, W, model.C, V)
    rel = filter_care_residual(model.A, W, model.C, V, sol.P) / np.linalg.norm(W)
    abscissa = spectral_abscissa(model.A - sol.gain @ model.C)

    rng = np.random.default_rng(20240)
    worst, done, skipped = 0.0, 0, 0
    while done < 100:
        A = rng.standard_normal((4, 4))
        C = rng.standard_normal((int(rng.integers(1, 5)), 4))
        G = rng.standard_normal((4, 4))
        H = rng.standard_normal((C.shape[0], C.shape[0]))
        Wr, Vr = G @ G.T + 1e-2 * np.eye(4), H @ H.T + 0.1 * np.eye(C.shape[0])
        if not well_posed(A.T, C.T, Wr, Vr):
            skipped += 1
            continue
        L = kalman_gain(A, Wr, C, Vr)
        K = lqr_gain(CareProblem(A.T, C.T, Wr, Vr))
        worst = max(worst, np.abs(L - K.T).max() / max(1.0, np.abs(K).max()))
        done += 1
    ok = rel <= 1e-8 and abscissa < 0 and worst <= 1e-8
    assert record("3 Kalman gain", ok, f"residual/||W|| {rel:.2e}, max Re eig(A-LC) {abscissa:.4g}, "
                                       f"duality gap {worst:.1e} over 100 systems ({skipped} ill-posed draws skipped)")


def test_4_altitude_step_orderings():
    t0 = time.perf_counter()
    runs = [summarize(run_scenario(altitude_step_scenario(q))) for q in Q_VARIANTS]
    elapsed = time.perf_counter() - t0
    rmse = [r.step.rmse for r in runs]
    over = [r.step.overshoot for r in runs]
    settle5 = runs[4].step.settling_time
    ok = (int(np.argmin(rmse)) == 4 and int(np.argmax(rmse)) == 1 and over[3] == 0 and over[4] == 0
          and abs(settle5 - 3.87) <= 0.2 * 3.87 and elapsed < 10)
    detail = (f"RMSE {[round(v, 4) for v in rmse]}, overshoot {over}, variant-5 settling {settle5:.3f} s, "
              f"{elapsed:.1f} s")
    assert record("4 altitude step", ok, detail)


def paired_rmse(kind):
    rows = []
    for seed in SEEDS:
        s = tracking_scenario(kind, seed=seed)
        lqr = summarize(run_scenario(s.with_mode(Mode.LQR_ONLY)))
        lqg = summarize(run_scenario(s.with_mode(Mode.LQG)))
        rows.append((lqr.rmse_full["x"], lqr.rmse_full["y"], lqg.rmse_full["x"], lqg.rmse_full["y"], lqg.status))
    return rows


def test_5_disturbed_tracking():
    t0 = time.perf_counter()
    ok = True
    details = []
    for kind in ("circle", "figure8"):
        rows = paired_rmse(kind)
        rx, ry, gx, gy = (np.median([r[i] for r in rows]) for i in range(4))
        good = gx < rx and gy <= 1.02 * ry
        if kind == "circle":
            good &= (rx - gx) / rx >= 0.05
        ok &= good
        statuses = ",".join(r[4] for r in rows)
        details.append(f"{kind}: median LQR x {rx:.4f} y {ry:.4f}, LQG x {gx:.4g} y {gy:.4g} [{statuses}]")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    assert record("5 disturbed tracking", ok, "; ".join(details) + f"; {elapsed:.0f} s")


def test_6_integrator():
    worst, where = 0.0, ""
    scenarios = [altitude_step_scenario(700), tracking_scenario("circle", seed=0),
                 tracking_scenario("figure8", seed=0)]
    for base in scenarios:
        for mode in (Mode.LQR_ONLY, Mode.LQG):
            s = base.with_mode(mode)
            a = run_scenario(s)
            b = run_scenario(replace(s, solver="rk4", rk4_dt=1e-4))
            # diverged runs stop early, compare over the samples both produced
            n = min(len(a.t), len(b.t))
            gap = np.abs(a.x[:n] - b.x[:n]).max()
            if gap >= worst:
                worst, where = gap, f"{s.trajectory.kind.value}/{mode.value}"

    def err(dt):
        return abs(integrate_rk4(lambda t, x: -x, [1.0], (0.0, 1.0), dt).x[-1, 0] - math.exp(-1))

    order = math.log2(err(0.05) / err(0.025))
    ok = worst < 1e-4 and 3.8 <= order <= 4.2
    assert record("6 integrator", ok, f"adaptive vs rk4 max-norm {worst:.2e} (worst {where}), rk4 order {order:.3f}")


def hp_eigvals(M):
    with mpmath.workdps(40):
        E, _ = mpmath.eig(mpmath.matrix(M.tolist()))
        return np.array([complex(z) for z in E])


def test_7_property_suites(params, model):
    rng = np.random.default_rng(7)
    u0 = hover_input(params)
    fixed = bool(np.all(nonlinear_derivative(np.zeros(12), u0, params) == 0.0))

    rt = 0.0
    for _ in range(1000):
        rotor = RotorState(*rng.uniform(0, 50, 2), *rng.uniform(-math.pi / 2, math.pi / 2, 2))
        u = actuator_forward(rotor, params)
        rt = max(rt, np.abs(actuator_forward(actuator_inverse(u, params), params) - u).max() / max(1, np.abs(u).max()))

    # hover model against the nonlinear model, every state and input channel
    h = 1e-6
    lin = 0.0
    worst_channel = ""
    for j in range(16):
        dx, du = np.zeros(12), np.zeros(4)
        (dx if j < 12 else du)[j % 12 if j < 12 else j - 12] = h
        fd = (nonlinear_derivative(dx, u0 + du, params) - nonlinear_derivative(-dx, u0 - du, params)) / (2 * h)
        col = model.A[:, j] if j < 12 else model.B[:, j - 12]
        e = np.abs(fd - col).max() / max(1.0, np.abs(col).max())
        if e > lin:
            lin, worst_channel = e, (f"x{j + 1}" if j < 12 else f"u{j - 11}")
    perturb = 0.0
    for _ in range(200):
        d = rng.standard_normal(16)
        d *= 1e-4 / np.linalg.norm(d)
        f = nonlinear_derivative(d[:12], u0 + d[12:], params)
        perturb = max(perturb, np.linalg.norm(f - (model.A @ d[:12] + model.B @ d[12:])))

    ranks = (controllability_rank(model), observability_rank(model))

    ctl = synthesize(model, 700 * np.eye(12), 1e-3 * np.eye(4), 0.01 * np.eye(12), 10 * np.eye(12),
                     KSynthesis.SEPARATION)
    A_cl, _ = linear_closed_loop(ctl)
    union = np.concatenate([hp_eigvals(ctl.regulator_matrix()), hp_eigvals(ctl.observer_matrix())])
    eig = hp_eigvals(A_cl)
    D = np.abs(eig[:, None] - union[None, :])
    r, c = linear_sum_assignment(D)
    sep = D[r, c].max()

    spec = NoiseSpec(seed=123, enabled=True)
    a, b = generate_noise(spec, 500), generate_noise(spec, 500)
    determinism = np.array_equal(a.w, b.w) and np.array_equal(a.v, b.v)

    parts = [
        record("7a hover fixed point", fixed, "exact zero" if fixed else "nonzero"),
        record("7b actuator round trip", rt < 1e-12, f"max relative error {rt:.1e}"),
        record("7c linearization consistency", lin < 1e-6 and perturb <= 1e-6,
               f"worst finite-difference column {worst_channel} off by {lin:.3g}, "
               f"perturbation error {perturb:.2e}"),
        record("7d ranks", ranks == (12, 12), f"controllability {ranks[0]}, observability {ranks[1]}"),
        record("7e separation spectrum", sep < 1e-6, f"max eigenvalue gap {sep:.1e}"),
        record("7f noise determinism", determinism, "identical" if determinism else "differs"),
    ]
    assert all(parts)
