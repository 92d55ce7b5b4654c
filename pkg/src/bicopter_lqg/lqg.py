"""LQG controller: Kalman observer plus state feedback on the hover model.

Two ways to compute the feedback gain are supported:

* ``PAPER_FAITHFUL``: K = lqr(A - L C, B, Q, R), the regulator is designed
  for the observer's error-injected dynamics.
* ``SEPARATION``: K = lqr(A, B, Q, R), the textbook choice.

The observer gain follows ``lqe(A, G, C, Qn, Rn)`` semantics, where the
process-noise covariance seen by the filter is ``G Qn G^T``. With
``noise_input="paper"`` the same matrix W is passed as both G and Qn, so the
filter sees W W W^T; ``noise_input="identity"`` uses G = I.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .linear_model import LinearModel, save_matrix
from .riccati import CareProblem, solve_care, solve_filter_care, spectral_abscissa


class Mode(str, Enum):
    LQR_ONLY = "lqr"
    LQG = "lqg"


class KSynthesis(str, Enum):
    PAPER_FAITHFUL = "paper"
    SEPARATION = "separation"


NOISE_INPUTS = ("paper", "identity")


class ClosedLoopUnstable(RuntimeError):
    pass


@dataclass(frozen=True)
class LqgController:
    K: np.ndarray
    L: np.ndarray
    model: LinearModel
    mode: Mode = Mode.LQG
    k_synthesis: KSynthesis = KSynthesis.PAPER_FAITHFUL
    k_residual: float = 0.0
    l_residual: float = 0.0
    filter_cov: np.ndarray | None = field(default=None, repr=False)

    def with_mode(self, mode: Mode) -> "LqgController":
        return LqgController(self.K, self.L, self.model, Mode(mode), self.k_synthesis,
                             self.k_residual, self.l_residual, self.filter_cov)

    def regulator_matrix(self) -> np.ndarray:
        return self.model.A - self.model.B @ self.K

    def observer_matrix(self) -> np.ndarray:
        return self.model.A - self.L @ self.model.C


def filter_process_cov(W: np.ndarray, noise_input: str = "paper") -> np.ndarray:
    if noise_input == "paper":
        return W @ W @ W.T
    if noise_input == "identity":
        return W
    raise ValueError(f"noise_input must be one of {NOISE_INPUTS}, got {noise_input!r}")


def synthesize(model: LinearModel, Q, R, W, V, k_synthesis: KSynthesis = KSynthesis.PAPER_FAITHFUL,
               mode: Mode = Mode.LQG, noise_input: str = "paper") -> LqgController:
    """Observer and feedback gains for the hover model.

    In ``LQR_ONLY`` mode the regulator is always the plain lqr(A, B, Q, R):
    without the observer in the loop the error-injected design has no
    meaning, and the baseline it is compared against is the textbook LQR.
    """
    Q, R, W, V = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (Q, R, W, V))
    A, B, C = model.A, model.B, model.C
    W_f = filter_process_cov(W, noise_input)
    est = solve_filter_care(A, W_f, C, V)
    L = est.gain

    mode = Mode(mode)
    k_synthesis = KSynthesis.SEPARATION if mode is Mode.LQR_ONLY else KSynthesis(k_synthesis)
    A_design = A - L @ C if k_synthesis is KSynthesis.PAPER_FAITHFUL else A
    reg = solve_care(CareProblem(A_design, B, Q, R))
    K = reg.gain

    ctl = LqgController(K=K, L=L, model=model, mode=mode, k_synthesis=k_synthesis,
                        k_residual=reg.residual_norm, l_residual=est.residual_norm, filter_cov=W_f)
    abscissa = spectral_abscissa(ctl.regulator_matrix())
    if abscissa >= 0:
        raise ClosedLoopUnstable(f"A - B K has spectral abscissa {abscissa:.4g}")
    return ctl


def observer_derivative(x_hat, u, y, ctl: LqgController) -> np.ndarray:
    m = ctl.model
    return m.A @ x_hat + m.B @ (np.asarray(u) - m.u_eq) + ctl.L @ (np.asarray(y) - m.C @ x_hat)


def control_law(x_or_xhat, x_ref, ctl: LqgController) -> np.ndarray:
    return ctl.model.u_eq - ctl.K @ (np.asarray(x_or_xhat) - np.asarray(x_ref))


def linear_closed_loop(ctl: LqgController) -> tuple[np.ndarray, np.ndarray]:
    """Closed loop of the controller around the linear model.

    LQG: state (x, x_hat), inputs (w, v) with y = C x + v. LQR: state x,
    input w. Returns (A_cl, B_noise).
    """
    A, B, C = ctl.model.A, ctl.model.B, ctl.model.C
    K, L = ctl.K, ctl.L
    n, p = A.shape[0], C.shape[0]
    if ctl.mode is Mode.LQR_ONLY:
        return A - B @ K, np.eye(n)
    A_cl = np.block([[A, -B @ K], [L @ C, A - B @ K - L @ C]])
    B_n = np.block([[np.eye(n), np.zeros((n, p))], [np.zeros((n, n)), L]])
    return A_cl, B_n


def export_gains(ctl: LqgController, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "K.txt", directory / "L.txt"]
    save_matrix(paths[0], ctl.K)
    save_matrix(paths[1], ctl.L)
    return paths
