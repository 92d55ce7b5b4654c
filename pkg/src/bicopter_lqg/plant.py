"""Nonlinear tilt-rotor Bicopter model.

State ordering (12): x, xd, y, yd, z, zd, phi, phid, theta, thetad, psi, psid.
Inputs (4): u1 collective vertical thrust, u2 differential vertical thrust,
u3 collective tilt thrust, u4 differential tilt thrust. All in newtons.

The z axis follows the model's convention where gravity enters the vertical
acceleration with a positive sign: zdd = g - cos(phi) cos(theta) u1 / m - ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

STATE_NAMES = ("x", "xd", "y", "yd", "z", "zd", "phi", "phid", "theta", "thetad", "psi", "psid")
INPUT_NAMES = ("u1", "u2", "u3", "u4")

X, XD, Y, YD, Z, ZD, PHI, PHID, THETA, THETAD, PSI, PSID = range(12)
N_STATES = 12
N_INPUTS = 4


class InvalidParameter(ValueError):
    """A physical parameter violates its invariant; ``field`` names it."""

    def __init__(self, field_name: str, value, requirement: str):
        self.field = field_name
        self.value = value
        super().__init__(f"{field_name}={value!r}: must be {requirement}")


class InfeasibleAllocation(ValueError):
    pass


def _require_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameter(name, value, "finite and > 0")


@dataclass(frozen=True)
class InertiaMatrix:
    """Diagonal body inertia in kg m^2."""

    ixx: float
    iyy: float
    izz: float

    def __post_init__(self):
        for name in ("ixx", "iyy", "izz"):
            _require_positive(name, getattr(self, name))

    def as_matrix(self) -> np.ndarray:
        return np.diag([self.ixx, self.iyy, self.izz])

    def diagonal(self) -> np.ndarray:
        return np.array([self.ixx, self.iyy, self.izz])

    def __add__(self, other: "InertiaMatrix") -> "InertiaMatrix":
        return InertiaMatrix(self.ixx + other.ixx, self.iyy + other.iyy, self.izz + other.izz)


@dataclass(frozen=True)
class PayloadSpec:
    """Rigid cuboid payload. Zero mass is allowed and yields no perturbation."""

    mass: float
    length: float
    width: float
    height: float

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise InvalidParameter("mass", self.mass, "finite and >= 0")
        for name in ("length", "width", "height"):
            _require_positive(name, getattr(self, name))


# Payload of the disturbed-tracking experiments: 0.2 kg cube with 8 cm sides.
TABLE_PAYLOAD = PayloadSpec(mass=0.2, length=0.08, width=0.08, height=0.08)


@dataclass(frozen=True)
class BicopterParams:
    mass: float = 0.725
    gravity: float = 9.81
    rotor_offset: float = 0.042  # h, vertical CoG to rotor centre
    arm: float = 0.225  # L, horizontal CoG to rotor centre
    thrust_coeff: float = 0.1222
    inertia: InertiaMatrix = field(default_factory=lambda: InertiaMatrix(0.116e-3, 0.0408e-3, 0.105e-3))

    def __post_init__(self):
        for name in ("mass", "gravity", "rotor_offset", "arm", "thrust_coeff"):
            _require_positive(name, getattr(self, name))

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity

    def with_payload(self, payload: PayloadSpec | None, adds_mass: bool = False) -> "BicopterParams":
        """Parameters of the vehicle carrying ``payload``.

        Only the inertia is perturbed unless ``adds_mass`` is set.
        """
        if payload is None:
            return self
        mass = self.mass + payload.mass if adds_mass else self.mass
        return replace(self, mass=mass, inertia=apply_payload(self.inertia, payload))


@dataclass(frozen=True)
class RotorState:
    omega_r: float
    omega_l: float
    gamma_r: float
    gamma_l: float

    def __post_init__(self):
        if self.omega_r < 0 or self.omega_l < 0:
            raise InvalidParameter("omega", (self.omega_r, self.omega_l), ">= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega_r, self.omega_l, self.gamma_r, self.gamma_l])


def apply_payload(j0: InertiaMatrix, payload: PayloadSpec) -> InertiaMatrix:
    m, d, w, h = payload.mass, payload.length, payload.width, payload.height
    return InertiaMatrix(
        j0.ixx + m * (d * d + h * h) / 12.0,
        j0.iyy + m * (d * d + w * w) / 12.0,
        j0.izz + m * (h * h + w * w) / 12.0,
    )


def actuator_forward(rotor: RotorState, params: BicopterParams) -> np.ndarray:
    ct = params.thrust_coeff
    fr = rotor.omega_r**2
    fl = rotor.omega_l**2
    vr, vl = fr * math.cos(rotor.gamma_r), fl * math.cos(rotor.gamma_l)
    hr, hl = fr * math.sin(rotor.gamma_r), fl * math.sin(rotor.gamma_l)
    return ct * np.array([vr + vl, vr - vl, hr + hl, hr - hl])


def _invert_side(vertical: float, lateral: float, ct: float, tilt_limit: float | None):
    if vertical == 0.0 and lateral == 0.0:
        # tilt is unobservable at zero thrust
        return 0.0, 0.0
    gamma = math.atan2(lateral, vertical)
    if tilt_limit is not None and abs(gamma) > tilt_limit:
        raise InfeasibleAllocation(f"tilt {gamma:.4f} rad exceeds limit {tilt_limit:.4f} rad")
    return math.sqrt(math.hypot(vertical, lateral) / ct), gamma


def actuator_inverse(u, params: BicopterParams, tilt_limit: float | None = None) -> RotorState:
    """Recover rotor speeds and tilt angles producing the virtual inputs ``u``.

    Each side contributes a (vertical, lateral) force pair; the tilt is the
    pair's angle from vertical and the squared speed its magnitude over C_T.
    """
    u1, u2, u3, u4 = (float(v) for v in u)
    ct = params.thrust_coeff
    om_r, g_r = _invert_side(0.5 * (u1 + u2), 0.5 * (u3 + u4), ct, tilt_limit)
    om_l, g_l = _invert_side(0.5 * (u1 - u2), 0.5 * (u3 - u4), ct, tilt_limit)
    return RotorState(om_r, om_l, g_r, g_l)


def hover_input(params: BicopterParams) -> np.ndarray:
    return np.array([params.hover_thrust, 0.0, 0.0, 0.0])


def nonlinear_derivative(state, u, params: BicopterParams) -> np.ndarray:
    _, xd, _, yd, _, zd, phi, phid, theta, thetad, psi, psid = state
    u1, u2, u3, u4 = u
    m = params.mass
    J = params.inertia
    sphi, cphi = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    spsi, cpsi = math.sin(psi), math.cos(psi)
    return np.array([
        xd,
        -(sphi * spsi + cphi * sth * cpsi) * u1 / m - cth * cpsi * u3 / m,
        yd,
        -(-sphi * cpsi + cphi * sth * spsi) * u1 / m + cth * spsi * u3 / m,
        zd,
        params.gravity - cphi * cth * u1 / m - sth * u3 / m,
        phid,
        params.arm / J.ixx * u2,
        thetad,
        params.rotor_offset / J.iyy * u3,
        psid,
        params.arm / J.izz * u4,
    ])


def jacobians(state, u, params: BicopterParams) -> tuple[np.ndarray, np.ndarray]:
    """Analytic partial derivatives (df/dx, df/du) of :func:`nonlinear_derivative`."""
    phi, theta, psi = state[PHI], state[THETA], state[PSI]
    u1, _, u3, _ = u
    m = params.mass
    J = params.inertia
    sphi, cphi = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    spsi, cpsi = math.sin(psi), math.cos(psi)

    fx = np.zeros((12, 12))
    for i in (X, Y, Z, PHI, THETA, PSI):
        fx[i, i + 1] = 1.0
    # xdd
    fx[XD, PHI] = -(cphi * spsi - sphi * sth * cpsi) * u1 / m
    fx[XD, THETA] = -(cphi * cth * cpsi) * u1 / m + sth * cpsi * u3 / m
    fx[XD, PSI] = -(sphi * cpsi - cphi * sth * spsi) * u1 / m + cth * spsi * u3 / m
    # ydd
    fx[YD, PHI] = -(-cphi * cpsi - sphi * sth * spsi) * u1 / m
    fx[YD, THETA] = -(cphi * cth * spsi) * u1 / m - sth * spsi * u3 / m
    fx[YD, PSI] = -(sphi * spsi + cphi * sth * cpsi) * u1 / m + cth * cpsi * u3 / m
    # zdd
    fx[ZD, PHI] = sphi * cth * u1 / m
    fx[ZD, THETA] = cphi * sth * u1 / m - cth * u3 / m

    fu = np.zeros((12, 4))
    fu[XD, 0] = -(sphi * spsi + cphi * sth * cpsi) / m
    fu[XD, 2] = -cth * cpsi / m
    fu[YD, 0] = -(-sphi * cpsi + cphi * sth * spsi) / m
    fu[YD, 2] = cth * spsi / m
    fu[ZD, 0] = -cphi * cth / m
    fu[ZD, 2] = -sth / m
    fu[PHID, 1] = params.arm / J.ixx
    fu[THETAD, 2] = params.rotor_offset / J.iyy
    fu[PSID, 3] = params.arm / J.izz
    return fx, fu
