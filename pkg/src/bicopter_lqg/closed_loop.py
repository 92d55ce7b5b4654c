"""Coupled nonlinear plant, observer and reference generator as one ODE.

State layout: plant x (12), then the observer estimate (12, LQG only), then
the reference exosystem state. Noise samples and the active plant
parameters are held constant over each sample interval and set through
:meth:`ClosedLoop.hold`.
"""

from __future__ import annotations

import numpy as np

from .lqg import LqgController, Mode
from .plant import BicopterParams, jacobians, nonlinear_derivative
from .trajectory import Exosystem


class ClosedLoop:
    def __init__(self, controller: LqgController, params: BicopterParams, exo: Exosystem):
        self.ctl = controller
        self.params = params
        self.exo = exo
        self.lqg = controller.mode is Mode.LQG
        n_obs = 12 if self.lqg else 0
        self.obs = slice(12, 12 + n_obs)
        self.ref = slice(12 + n_obs, 12 + n_obs + exo.size)
        self.size = 12 + n_obs + exo.size
        self.w = np.zeros(12)
        self.v = np.zeros(12)

        m = controller.model
        self._A, self._B, self._C = m.A, m.B, m.C
        self._K, self._L = controller.K, controller.L
        self._u_eq = m.u_eq
        self._KR = controller.K @ exo.readout
        # observer dynamics under its own feedback, without the reference term
        self._obs_A = m.A - m.B @ controller.K - controller.L @ m.C

    def hold(self, params: BicopterParams, w, v) -> None:
        self.params = params
        self.w = np.asarray(w, dtype=float)
        self.v = np.asarray(v, dtype=float)

    def initial_state(self, x0, t0: float = 0.0, x_hat0=None) -> np.ndarray:
        z = np.zeros(self.size)
        z[:12] = x0
        if self.lqg:
            z[self.obs] = x0 if x_hat0 is None else x_hat0
        z[self.ref] = self.exo.state_at(t0)
        return z

    def split(self, z):
        x = z[:12]
        x_hat = z[self.obs] if self.lqg else None
        return x, x_hat, z[self.ref]

    def control(self, z) -> np.ndarray:
        x, x_hat, s = self.split(z)
        fb = x_hat if self.lqg else x
        return self._u_eq - self._K @ fb + self._KR @ s

    def rhs(self, t: float, z: np.ndarray) -> np.ndarray:
        x, x_hat, s = self.split(z)
        u = self.control(z)
        out = np.empty(self.size)
        out[:12] = nonlinear_derivative(x, u, self.params) + self.w
        if self.lqg:
            y = self._C @ x + self.v
            out[self.obs] = self._A @ x_hat + self._B @ (u - self._u_eq) + self._L @ (y - self._C @ x_hat)
        out[self.ref] = self.exo.S @ s
        return out

    def jacobian(self, t: float, z: np.ndarray) -> np.ndarray:
        x = z[:12]
        u = self.control(z)
        fx, fu = jacobians(x, u, self.params)
        J = np.zeros((self.size, self.size))
        fb = self.obs if self.lqg else slice(0, 12)
        J[:12, :12] = fx
        J[:12, fb] += -fu @ self._K
        J[:12, self.ref] = fu @ self._KR
        if self.lqg:
            J[self.obs, :12] = self._L @ self._C
            J[self.obs, self.obs] = self._obs_A
            J[self.obs, self.ref] = self._B @ self._KR
        J[self.ref, self.ref] = self.exo.S
        return J
