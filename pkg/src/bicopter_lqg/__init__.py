"""LQR/LQG control of a tilt-rotor Bicopter: model, Riccati solvers, simulation and metrics."""

from .linear_model import LinearModel, build_linear_model
from .lqg import KSynthesis, LqgController, Mode, synthesize
from .plant import BicopterParams, InertiaMatrix, PayloadSpec, apply_payload
from .riccati import CareProblem, kalman_gain, lqr_gain, solve_care, solve_lyapunov
from .scenarios import Scenario, run_scenario

__all__ = [
    "BicopterParams", "CareProblem", "InertiaMatrix", "KSynthesis", "LinearModel", "LqgController", "Mode",
    "PayloadSpec", "Scenario", "apply_payload", "build_linear_model", "kalman_gain", "lqr_gain", "run_scenario",
    "solve_care", "solve_lyapunov", "synthesize",
]
