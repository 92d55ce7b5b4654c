"""Scenario definitions and the closed-loop runner.

Presets reproduce the three experiments: a 2 m altitude step, a circle of
radius 1.3 m at pi rad/s, and a figure-8 at 0.25 pi rad/s, the latter two
with a 0.2 kg cubic payload on board and Gaussian process/measurement noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .closed_loop import ClosedLoop
from .integrator import (IntegrationError, IntegratorConfig, StopIntegration, integrate_adaptive,
                         integrate_rk4)
from .linear_model import build_linear_model
from .lqg import KSynthesis, LqgController, Mode, synthesize
from .plant import TABLE_PAYLOAD, BicopterParams, PayloadSpec, actuator_inverse
from .riccati import RiccatiError
from .trajectory import Trajectory, TrajectoryKind, altitude_step, circle, exosystem, figure8, reference_state

SAMPLE_DT = 0.01
# a run counts as diverged once any position is this far off the reference (m)
DIVERGENCE_ERROR = 50.0

DEFAULT_DURATIONS = {
    TrajectoryKind.ALTITUDE_STEP: 10.0,
    TrajectoryKind.CIRCLE: 20.0,
    TrajectoryKind.FIGURE8: 16.0,
    TrajectoryKind.CUSTOM: 10.0,
}

# the five state-weight variants of the altitude study, as multiples of C^T C = I
Q_VARIANTS = (1.0, 0.1, 10.0, 300.0, 700.0)


class CovarianceNotPSD(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    process_cov: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(12))
    measurement_cov: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(12))
    seed: int = 0
    enabled: bool = False


@dataclass(frozen=True)
class NoiseSequence:
    w: np.ndarray  # (n_steps, dim) process noise, one draw per hold interval
    v: np.ndarray  # (n_steps, dim) measurement noise


def covariance_factor(cov, tol: float = 1e-12) -> np.ndarray:
    """F with F F^T = cov. Cholesky when positive definite, eigen-factor when only semidefinite."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not np.allclose(cov, cov.T, rtol=0, atol=tol * max(1.0, np.abs(cov).max())):
        raise CovarianceNotPSD("covariance is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        lam, U = np.linalg.eigh(0.5 * (cov + cov.T))
        if lam.min() < -tol * max(1.0, abs(lam).max()):
            raise CovarianceNotPSD(f"covariance has eigenvalue {lam.min():.3e}") from None
        return U * np.sqrt(np.clip(lam, 0.0, None))


def draw_gaussian(cov, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    F = covariance_factor(cov)
    return rng.standard_normal((n_steps, F.shape[0])) @ F.T


def generate_noise(spec: NoiseSpec, n_steps: int, dim: int = 12) -> NoiseSequence:
    """Zero-mean Gaussian draws; w and v come from independent child streams of ``seed``."""
    W = np.atleast_2d(np.asarray(spec.process_cov, dtype=float))
    V = np.atleast_2d(np.asarray(spec.measurement_cov, dtype=float))
    if W.shape != (dim, dim) or V.shape != (dim, dim):
        raise ValueError(f"noise covariances must be {dim}x{dim}")
    # validate even when disabled so bad files fail early
    covariance_factor(W)
    covariance_factor(V)
    if not spec.enabled:
        return NoiseSequence(np.zeros((n_steps, dim)), np.zeros((n_steps, dim)))
    w_seed, v_seed = np.random.SeedSequence(spec.seed).spawn(2)
    return NoiseSequence(draw_gaussian(W, n_steps, np.random.default_rng(w_seed)),
                         draw_gaussian(V, n_steps, np.random.default_rng(v_seed)))


@dataclass(frozen=True)
class ControllerConfig:
    Q: np.ndarray = field(default_factory=lambda: 700.0 * np.eye(12))
    R: np.ndarray = field(default_factory=lambda: 0.001 * np.eye(4))
    W: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(12))
    V: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(12))
    mode: Mode = Mode.LQG
    k_synthesis: KSynthesis = KSynthesis.PAPER_FAITHFUL
    noise_input: str = "paper"
    b_sign_corrected: bool = True
    attitude_feedforward: bool = True


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    trajectory: Trajectory = field(default_factory=altitude_step)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    params: BicopterParams = field(default_factory=BicopterParams)
    payload: PayloadSpec | None = None
    attach_time: float = 0.0
    payload_adds_mass: bool = False
    duration: float | None = None
    initial_state: np.ndarray | None = None
    observer_init: str = "measurement"  # or "true"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    solver: str = "adaptive"  # or "rk4"
    rk4_dt: float = 1e-4
    rk4_relin_dt: float = 1e-3
    sample_dt: float = SAMPLE_DT
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.duration is None:
            object.__setattr__(self, "duration", DEFAULT_DURATIONS[self.trajectory.kind])
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if not 0 <= self.attach_time <= self.duration:
            raise ValueError("attach_time must lie in [0, duration]")
        if self.observer_init not in ("measurement", "true"):
            raise ValueError("observer_init must be 'measurement' or 'true'")
        if self.solver not in ("adaptive", "rk4"):
            raise ValueError("solver must be 'adaptive' or 'rk4'")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be > 0")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.sample_dt))

    def start_state(self) -> np.ndarray:
        if self.initial_state is not None:
            return np.asarray(self.initial_state, dtype=float)
        if self.trajectory.kind is TrajectoryKind.ALTITUDE_STEP:
            return np.zeros(12)
        # on the reference position and heading, at rest and level
        ref = reference_state(self.trajectory, 0.0, self.params.gravity)
        x0 = np.zeros(12)
        x0[[0, 2, 4, 10]] = ref[[0, 2, 4, 10]]
        return x0

    def with_mode(self, mode: Mode) -> "Scenario":
        return replace(self, controller=replace(self.controller, mode=Mode(mode)))


class Status(str, Enum):
    OK = "ok"
    DIVERGED = "diverged"
    SYNTHESIS_FAILED = "synthesis_failed"
    INTEGRATION_FAILED = "integration_failed"


@dataclass
class ScenarioResult:
    scenario: Scenario
    status: Status
    message: str = ""
    controller: LqgController | None = None
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x: np.ndarray = field(default_factory=lambda: np.zeros((0, 12)))
    x_hat: np.ndarray | None = None
    x_ref: np.ndarray = field(default_factory=lambda: np.zeros((0, 12)))
    u: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    rotor: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    n_steps: int = 0

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


def build_controller(s: Scenario) -> LqgController:
    cc = s.controller
    model = build_linear_model(s.params, b_sign_corrected=cc.b_sign_corrected)
    return synthesize(model, cc.Q, cc.R, cc.W, cc.V, cc.k_synthesis, cc.mode, cc.noise_input)


def run_scenario(s: Scenario, controller: LqgController | None = None) -> ScenarioResult:
    """Simulate the nonlinear plant under the scenario's controller.

    The payload perturbs the plant from the first sample instant at or after
    ``attach_time``; the controller is always designed on the nominal model.
    """
    try:
        ctl = controller if controller is not None else build_controller(s)
    except (RiccatiError, ValueError, RuntimeError) as exc:
        return ScenarioResult(s, Status.SYNTHESIS_FAILED, f"{type(exc).__name__}: {exc}")
    if ctl.mode is not s.controller.mode:
        raise ValueError(f"controller is in {ctl.mode.value} mode but the scenario asks for {s.controller.mode.value}")

    g = s.params.gravity
    exo = exosystem(s.trajectory, g, s.controller.attitude_feedforward)
    loop = ClosedLoop(ctl, s.params, exo)
    n = s.n_samples
    try:
        noise = generate_noise(s.noise, n)
    except (CovarianceNotPSD, ValueError) as exc:
        return ScenarioResult(s, Status.SYNTHESIS_FAILED, f"{type(exc).__name__}: {exc}", ctl)

    x0 = s.start_state()
    x_hat0 = ctl.model.C @ x0 + noise.v[0] if s.observer_init == "measurement" else x0
    z0 = loop.initial_state(x0, 0.0, x_hat0)
    obs = loop.obs

    def diverged(z: np.ndarray) -> bool:
        if not np.all(np.isfinite(z)):
            return True
        err = z[:12] - exo.readout @ z[loop.ref]
        return bool(np.abs(err[[0, 2, 4]]).max() > DIVERGENCE_ERROR)

    def on_sample(k: int, t: float, z: np.ndarray) -> np.ndarray:
        if diverged(z):
            raise StopIntegration(f"position error exceeded {DIVERGENCE_ERROR:g} m by t={t:.2f} s")
        loop.hold(payload_schedule(s, t), noise.w[k], noise.v[k])
        return z

    try:
        if s.solver == "adaptive":
            res = integrate_adaptive(loop.rhs, z0, (0.0, s.duration), s.integrator, s.sample_dt,
                                     jacobian=loop.jacobian, on_sample=on_sample)
        else:
            res = integrate_rk4(loop.rhs, z0, (0.0, s.duration), s.rk4_dt, s.sample_dt,
                                jacobian=loop.jacobian, on_sample=on_sample, relin_dt=s.rk4_relin_dt)
    except IntegrationError as exc:
        return ScenarioResult(s, Status.INTEGRATION_FAILED, f"{type(exc).__name__}: {exc}", ctl)

    status, message = Status.OK, ""
    Z = res.x
    if res.terminated:
        status, message = Status.DIVERGED, res.message
    elif diverged(Z[-1]):
        status, message = Status.DIVERGED, f"position error exceeded {DIVERGENCE_ERROR:g} m by the final sample"

    t = res.t
    x_ref = np.array([reference_state(s.trajectory, ti, g, s.controller.attitude_feedforward) for ti in t])
    u = np.array([loop.control(z) for z in Z])
    rotor = np.full((len(t), 4), np.nan)
    for i, ui in enumerate(u):
        if np.all(np.isfinite(ui)):
            rotor[i] = actuator_inverse(ui, s.params).as_array()
    return ScenarioResult(
        scenario=s, status=status, message=message, controller=ctl, t=t, x=Z[:, :12],
        x_hat=Z[:, obs] if loop.lqg else None, x_ref=x_ref, u=u, rotor=rotor, n_steps=res.n_steps,
    )


def payload_schedule(s: Scenario, t: float) -> BicopterParams:
    """Plant parameters in effect at time t."""
    if s.payload is not None and t >= s.attach_time - 1e-9:
        return s.params.with_payload(s.payload, s.payload_adds_mass)
    return s.params


# presets ---------------------------------------------------------------------

def altitude_step_scenario(q_scale: float = 700.0, mode: Mode = Mode.LQR_ONLY, **kw) -> Scenario:
    cc = ControllerConfig(Q=q_scale * np.eye(12), mode=mode)
    return Scenario(name=f"altitude_step_q{q_scale:g}", trajectory=altitude_step(), controller=cc, **kw)


def tracking_scenario(kind: str = "circle", mode: Mode = Mode.LQG, seed: int = 0, noise: bool = True,
                      payload: PayloadSpec | None = TABLE_PAYLOAD, **kw) -> Scenario:
    traj = {"circle": circle, "figure8": figure8}[kind]()
    cc_kw = {k: kw.pop(k) for k in list(kw) if k in ControllerConfig.__dataclass_fields__}
    cc = ControllerConfig(mode=mode, **cc_kw)
    ns = NoiseSpec(seed=seed, enabled=noise)
    return Scenario(name=f"{kind}_{Mode(mode).value}", trajectory=traj, controller=cc, payload=payload,
                    noise=ns, **kw)

