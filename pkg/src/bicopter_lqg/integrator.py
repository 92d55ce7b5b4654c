"""Time integration for the closed-loop simulations.

``integrate_adaptive`` is a Dormand-Prince 5(4) pair with PI step-size
control. Called with a ``jacobian`` it switches to an integrating-factor
(Lawson) form of the same tableau: at the start of every step the
right-hand side is split into its local affine model ``J x + c``, which is
propagated exactly with a matrix exponential, and the small remainder, which
the explicit stages handle. The LQR/LQG loops have closed-loop poles near
-1e6 rad/s, so the plain explicit pair would need steps of about 1e-6 s,
whereas the split form takes steps sized by the accuracy of the remainder.

``integrate_rk4`` is the fixed-step classical 4-stage method, with the same
optional integrating-factor treatment, used as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.linalg as sla

Rhs = Callable[[float, np.ndarray], np.ndarray]
Jacobian = Callable[[float, np.ndarray], np.ndarray]
# called as on_sample(k, t, x) at the start of hold interval k; returns the
# (possibly modified) state, or raises StopIntegration
SampleHook = Callable[[int, float, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    pass


class StepUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class StopIntegration(Exception):
    """Raised by a sample hook to end the run early; the samples so far are kept."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 0.1
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class IntegrationResult:
    t: np.ndarray
    x: np.ndarray  # (len(t), n)
    n_steps: int
    n_rejected: int
    terminated: bool = False
    message: str = ""


# Dormand-Prince 5(4)
C = [Fraction(0), Fraction(1, 5), Fraction(3, 10), Fraction(4, 5), Fraction(8, 9), Fraction(1), Fraction(1)]
A = [
    [],
    [Fraction(1, 5)],
    [Fraction(3, 40), Fraction(9, 40)],
    [Fraction(44, 45), Fraction(-56, 15), Fraction(32, 9)],
    [Fraction(19372, 6561), Fraction(-25360, 2187), Fraction(64448, 6561), Fraction(-212, 729)],
    [Fraction(9017, 3168), Fraction(-355, 33), Fraction(46732, 5247), Fraction(49, 176), Fraction(-5103, 18656)],
    [Fraction(35, 384), Fraction(0), Fraction(500, 1113), Fraction(125, 192), Fraction(-2187, 6784), Fraction(11, 84)],
]
B = A[6] + [Fraction(0)]
B_HAT = [Fraction(5179, 57600), Fraction(0), Fraction(7571, 16695), Fraction(393, 640),
         Fraction(-92097, 339200), Fraction(187, 2100), Fraction(1, 40)]
E_COEF = np.array([float(b - bh) for b, bh in zip(B, B_HAT)])
A_F = [np.array([float(v) for v in row]) for row in A]
C_F = np.array([float(c) for c in C])

# Shampine's 4th-order continuous extension: x(t0 + s h) = x0 + h K^T P [s, s^2, s^3, s^4]
DENSE_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# every node and node difference of the tableau is a multiple of 1/90
_GRID = 90
_NEEDED = sorted({int(c * _GRID) for c in C} | {int((C[i] - C[j]) * _GRID) for i in range(7) for j in range(i)}
                 | {int((1 - c) * _GRID) for c in C})

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 5.0
PI_ALPHA, PI_BETA = 0.17, 0.04


def _sample_grid(t_span, sample_dt):
    t0, tf = map(float, t_span)
    if not tf > t0:
        raise ValueError("t_span must satisfy t0 < tf")
    if sample_dt is None:
        return np.array([t0, tf])
    n = (tf - t0) / sample_dt
    n_int = int(round(n))
    if n_int < 1 or abs(n - n_int) > 1e-9 * max(1.0, n):
        raise ValueError("t_span must be a whole number of samples")
    return t0 + sample_dt * np.arange(n_int + 1)


def _error_norm(err, x_old, x_new, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x_old), np.abs(x_new))
    return float(np.max(np.abs(err) / scale))


def _next_factor(en: float, en_prev: float, accepted: bool) -> float:
    if en == 0.0:
        return FAC_MAX
    fac = SAFETY * en ** (-PI_ALPHA) * en_prev ** PI_BETA if accepted else SAFETY * en ** -0.2
    return min(FAC_MAX, max(FAC_MIN, fac))


def _dp_step(f: Rhs, t, x, h, k1):
    k = [k1]
    for i in range(1, 7):
        xi = x + h * (A_F[i] @ np.array(k))
        k.append(f(t + C_F[i] * h, xi))
    x_new = x + h * (A_F[6] @ np.array(k[:6]))
    err = h * (E_COEF @ np.array(k))
    return x_new, err, k


def _dense(x0, h, k, s):
    powers = np.array([s, s * s, s ** 3, s ** 4])
    return x0 + h * (np.array(k).T @ (DENSE_P @ powers))


def _adaptive_plain(f, x0, grid, cfg, on_sample, sample_dt):
    n = x0.size
    out = np.empty((grid.size, n))
    out[0] = x0
    t, x = grid[0], x0.copy()
    tf = grid[-1]
    h = cfg.h_init
    en_prev = 1e-4
    steps = rejected = 0
    filled = 1

    # with a hold hook, each sample interval is integrated on its own
    segments = [(grid[i], grid[i + 1]) for i in range(grid.size - 1)] if on_sample else [(grid[0], tf)]
    try:
        for seg_idx, (ta, tb) in enumerate(segments):
            if on_sample:
                x = np.asarray(on_sample(seg_idx, ta, x), dtype=float)
                out[seg_idx] = x
            t = ta
            k1 = f(t, x)
            while t < tb - 1e-12 * max(1.0, abs(tb)):
                if steps >= cfg.max_steps:
                    raise MaxStepsExceeded(f"exceeded {cfg.max_steps} steps at t={t:.6g}")
                h = min(h, cfg.h_max)
                last = h >= tb - t
                h_try = tb - t if last else h
                if h_try < cfg.h_min and not last:
                    raise StepUnderflow(f"step {h_try:.3e} below h_min at t={t:.6g}")
                x_new, err, k = _dp_step(f, t, x, h_try, k1)
                steps += 1
                en = _error_norm(err, x, x_new, cfg)
                if not np.isfinite(en):
                    en = np.inf
                if en <= 1.0:
                    t_new = tb if last else t + h_try
                    if not on_sample:
                        while filled < grid.size and grid[filled] <= t_new + 1e-12 * max(1.0, abs(t_new)):
                            s = (grid[filled] - t) / h_try
                            out[filled] = x_new if abs(grid[filled] - t_new) < 1e-12 else _dense(x, h_try, k, s)
                            filled += 1
                    t, x = t_new, x_new
                    k1 = k[6]
                    fac = _next_factor(en, en_prev, True)
                    en_prev = max(en, 1e-4)
                    if not last or fac < 1:
                        h = h_try * fac
                else:
                    rejected += 1
                    if not np.isfinite(en):
                        h = h_try * FAC_MIN
                    else:
                        h = h_try * _next_factor(en, en_prev, False)
                    if h < cfg.h_min:
                        raise StepUnderflow(f"step {h:.3e} below h_min at t={t:.6g}")
            if on_sample:
                out[seg_idx + 1] = x
                filled = seg_idx + 2
    except StopIntegration as stop:
        return IntegrationResult(grid[:filled], out[:filled], steps, rejected, True, str(stop))
    return IntegrationResult(grid, out, steps, rejected)


def _exp_powers(M: np.ndarray, h: float) -> dict[int, np.ndarray]:
    """exp(M h j / 90) for every j the tableau needs, from one expm and products."""
    E1 = sla.expm(M * (h / _GRID))
    powers = {0: np.eye(M.shape[0]), 1: E1}

    def power(j):
        if j not in powers:
            half = power(j // 2)
            p = half @ half
            if j % 2:
                p = p @ E1
            powers[j] = p
        return powers[j]

    for j in _NEEDED:
        power(j)
    return powers


def _augment(jac: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = jac.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = jac
    M[:n, n] = c
    return M


# per stage: (exponent index of c_i, [(j, a_ij, exponent index of c_i - c_j)])
_LAWSON_STAGES = [
    (int(C[i] * _GRID), [(j, float(A[i][j]), int((C[i] - C[j]) * _GRID)) for j in range(i) if A[i][j] != 0])
    for i in range(7)
]
_LAWSON_ERR = [(j, float(E_COEF[j]), int((1 - C[j]) * _GRID)) for j in range(7) if E_COEF[j] != 0]


def _lawson_dp_step(N, E, t, z, h, k1):
    """One integrating-factor DP5 step on the augmented state z."""
    k = [k1]
    zi = z
    for i in range(1, 7):
        ci, terms = _LAWSON_STAGES[i]
        zi = E[ci] @ z
        for j, a, d in terms:
            zi = zi + (h * a) * (E[d] @ k[j])
        k.append(N(t + C_F[i] * h, zi))
    err = h * sum(e * (E[d] @ k[j]) for j, e, d in _LAWSON_ERR)
    return zi, err, k


def _adaptive_lawson(f, jac, x0, grid, cfg, on_sample):
    n = x0.size
    out = np.empty((grid.size, n))
    x = x0.copy()
    out[0] = x
    steps = rejected = 0
    en_prev = 1e-4
    h_prop = cfg.h_init
    filled = 1
    try:
        for seg in range(grid.size - 1):
            ta, tb = grid[seg], grid[seg + 1]
            if on_sample:
                x = np.asarray(on_sample(seg, ta, x), dtype=float)
                out[seg] = x
            t = ta
            while t < tb - 1e-12 * max(1.0, abs(tb)):
                # re-linearise at the start of every step; the remainder then
                # vanishes at the step's initial point, so k1 = 0
                J = jac(t, x)
                c = f(t, x) - J @ x
                M = _augment(J, c)

                def N(tt, zz, J=J, c=c):
                    r = np.zeros(n + 1)
                    r[:n] = f(tt, zz[:n]) - J @ zz[:n] - c
                    return r

                z = np.append(x, 1.0)
                k1 = np.zeros(n + 1)
                while True:
                    if steps >= cfg.max_steps:
                        raise MaxStepsExceeded(f"exceeded {cfg.max_steps} steps at t={t:.6g}")
                    h = min(h_prop, cfg.h_max, tb - t)
                    if h < cfg.h_min and h < tb - t:
                        raise StepUnderflow(f"step {h:.3e} below h_min at t={t:.6g}")
                    z_new, err, _ = _lawson_dp_step(N, _exp_powers(M, h), t, z, h, k1)
                    steps += 1
                    en = _error_norm(err[:n], z[:n], z_new[:n], cfg)
                    if not np.isfinite(en):
                        en = np.inf
                    if en <= 1.0:
                        clipped = h < h_prop
                        t = tb if abs(tb - (t + h)) < 1e-12 * max(1.0, abs(tb)) else t + h
                        x = z_new[:n]
                        fac = _next_factor(en, en_prev, True)
                        en_prev = max(en, 1e-4)
                        # a step shortened to hit the interval end says nothing about growth
                        if not clipped or fac < 1:
                            h_prop = h * fac
                        break
                    rejected += 1
                    h_prop = h * (FAC_MIN if not np.isfinite(en) else _next_factor(en, en_prev, False))
            out[seg + 1] = x
            filled = seg + 2
    except StopIntegration as stop:
        return IntegrationResult(grid[:filled], out[:filled], steps, rejected, True, str(stop))
    return IntegrationResult(grid, out, steps, rejected)


def integrate_adaptive(f: Rhs, x0, t_span, config: IntegratorConfig | None = None, sample_dt: float | None = None,
                       jacobian: Jacobian | None = None, on_sample: SampleHook | None = None) -> IntegrationResult:
    """Integrate x' = f(t, x) and return the state on the uniform ``sample_dt`` grid.

    ``on_sample`` makes every sample interval a separate hold interval (used
    for zero-order-held noise). ``jacobian`` selects the integrating-factor
    form, which always works interval by interval; it requires ``sample_dt``.
    """
    cfg = config or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float).copy()
    grid = _sample_grid(t_span, sample_dt)
    if jacobian is not None:
        if sample_dt is None:
            raise ValueError("the integrating-factor path needs sample_dt")
        return _adaptive_lawson(f, jacobian, x0, grid, cfg, on_sample)
    return _adaptive_plain(f, x0, grid, cfg, on_sample, sample_dt)


def _rk4_plain_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_lawson_step(N, E_half, E_full, t, z, h):
    k1 = N(t, z)
    z2 = E_half @ (z + h / 2 * k1)
    k2 = N(t + h / 2, z2)
    z3 = E_half @ z + h / 2 * k2
    k3 = N(t + h / 2, z3)
    z4 = E_full @ z + h * (E_half @ k3)
    k4 = N(t + h, z4)
    return E_full @ z + h / 6 * (E_full @ k1 + 2 * (E_half @ (k2 + k3)) + k4)


def integrate_rk4(f: Rhs, x0, t_span, dt: float, sample_dt: float | None = None,
                  jacobian: Jacobian | None = None, on_sample: SampleHook | None = None,
                  relin_dt: float | None = None) -> IntegrationResult:
    """Fixed-step classical RK4.

    Output is every step, or only the ``sample_dt`` grid when given (which
    must be a whole number of steps). ``on_sample`` and ``jacobian`` behave
    as in :func:`integrate_adaptive`, except that the integrating-factor
    form here linearises on its own fixed schedule, every ``relin_dt``
    seconds (default: once per sample interval), rather than every step.
    A linearisation frozen over a fast transient leaves a stiff remainder
    and the method loses order, so ``relin_dt`` should stay short where the
    state moves quickly.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    out_dt = sample_dt if sample_dt is not None else dt
    grid = _sample_grid(t_span, out_dt)
    per = out_dt / dt
    n_sub = int(round(per))
    if n_sub < 1 or abs(per - n_sub) > 1e-9 * per:
        raise ValueError("sample_dt must be a whole number of steps")
    if jacobian is not None and sample_dt is None:
        raise ValueError("the integrating-factor path needs sample_dt")
    every = n_sub
    if relin_dt is not None:
        every = int(round(relin_dt / dt))
        if every < 1 or abs(relin_dt / dt - every) > 1e-9 * every or n_sub % every:
            raise ValueError("relin_dt must be a whole number of steps dividing the sample interval")
    out = np.empty((grid.size, n))
    out[0] = x
    steps = 0
    filled = 1
    try:
        for seg in range(grid.size - 1):
            ta = grid[seg]
            if on_sample:
                x = np.asarray(on_sample(seg, ta, x), dtype=float)
                out[seg] = x
            if jacobian is None:
                for i in range(n_sub):
                    x = _rk4_plain_step(f, ta + i * dt, x, dt)
            else:
                for i in range(n_sub):
                    t = ta + i * dt
                    if i % every == 0:
                        J = jacobian(t, x)
                        c = f(t, x) - J @ x
                        E_half = sla.expm(_augment(J, c) * (dt / 2))
                        E_full = E_half @ E_half

                        def N(tt, zz, J=J, c=c):
                            r = np.zeros(n + 1)
                            r[:n] = f(tt, zz[:n]) - J @ zz[:n] - c
                            return r

                    x = _rk4_lawson_step(N, E_half, E_full, t, np.append(x, 1.0), dt)[:n]
            steps += n_sub
            out[seg + 1] = x
            filled = seg + 2
    except StopIntegration as stop:
        return IntegrationResult(grid[:filled], out[:filled], steps, 0, True, str(stop))
    return IntegrationResult(grid, out, steps, 0)
