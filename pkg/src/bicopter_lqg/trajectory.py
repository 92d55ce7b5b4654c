"""Reference trajectories built from constant offsets and harmonics.

Every reference used here is a finite sum of sinusoids per axis, so it is
also the output of a linear exosystem s' = S s with
s = (1, cos w1 t, sin w1 t, cos w2 t, ...). The closed-loop simulator carries
that exosystem in its state so the reference evolves exactly under the
integrating-factor stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .plant import PHI, PSI, THETA, X, XD, Y, YD, Z, ZD


class TrajectoryKind(str, Enum):
    ALTITUDE_STEP = "altitude_step"
    CIRCLE = "circle"
    FIGURE8 = "figure8"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Harmonic:
    """cos_amp * cos(omega t) + sin_amp * sin(omega t)."""

    omega: float
    cos_amp: float = 0.0
    sin_amp: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"harmonic frequency must be positive, got {self.omega}")


@dataclass(frozen=True)
class AxisSignal:
    offset: float = 0.0
    harmonics: tuple[Harmonic, ...] = ()

    def value(self, t: float) -> float:
        return self.offset + sum(h.cos_amp * math.cos(h.omega * t) + h.sin_amp * math.sin(h.omega * t)
                                 for h in self.harmonics)

    def rate(self, t: float) -> float:
        return sum(h.omega * (h.sin_amp * math.cos(h.omega * t) - h.cos_amp * math.sin(h.omega * t))
                   for h in self.harmonics)

    def accel(self, t: float) -> float:
        return -sum(h.omega ** 2 * (h.cos_amp * math.cos(h.omega * t) + h.sin_amp * math.sin(h.omega * t))
                    for h in self.harmonics)


@dataclass(frozen=True)
class Trajectory:
    kind: TrajectoryKind
    x: AxisSignal = field(default_factory=AxisSignal)
    y: AxisSignal = field(default_factory=AxisSignal)
    z: AxisSignal = field(default_factory=AxisSignal)
    yaw: AxisSignal = field(default_factory=AxisSignal)

    @property
    def axes(self) -> tuple[AxisSignal, ...]:
        return (self.x, self.y, self.z, self.yaw)

    def frequencies(self) -> list[float]:
        seen: list[float] = []
        for axis in self.axes:
            for h in axis.harmonics:
                if h.omega not in seen:
                    seen.append(h.omega)
        return seen

    @property
    def period(self) -> float | None:
        """Common period of all harmonics, or None for a constant reference."""
        freqs = self.frequencies()
        if not freqs:
            return None
        base = min(freqs)
        ratios = [w / base for w in freqs]
        # smallest integer multiple of the slowest period that fits every harmonic
        for mult in range(1, 1000):
            if all(abs(mult * r - round(mult * r)) < 1e-9 for r in ratios):
                return mult * 2 * math.pi / base
        raise ValueError("harmonic frequencies are not commensurate")


def altitude_step(altitude: float = 2.0, yaw: float = 0.0) -> Trajectory:
    return Trajectory(TrajectoryKind.ALTITUDE_STEP, z=AxisSignal(altitude), yaw=AxisSignal(yaw))


def circle(radius: float = 1.3, omega: float = math.pi, altitude: float = 2.0, yaw: float = 0.0) -> Trajectory:
    # x = -r cos(w t), y = r sin(w t)
    return Trajectory(
        TrajectoryKind.CIRCLE,
        x=AxisSignal(0.0, (Harmonic(omega, cos_amp=-radius),)),
        y=AxisSignal(0.0, (Harmonic(omega, sin_amp=radius),)),
        z=AxisSignal(altitude),
        yaw=AxisSignal(yaw),
    )


def figure8(x_amp: float = 1.0, y_amp: float = 1.0, omega: float = 0.25 * math.pi, altitude: float = 2.0,
            yaw: float = 0.0) -> Trajectory:
    # x = a sin(w t), y = b sin(2 w t)
    return Trajectory(
        TrajectoryKind.FIGURE8,
        x=AxisSignal(0.0, (Harmonic(omega, sin_amp=x_amp),)),
        y=AxisSignal(0.0, (Harmonic(2 * omega, sin_amp=y_amp),)),
        z=AxisSignal(altitude),
        yaw=AxisSignal(yaw),
    )


@dataclass(frozen=True)
class TrajectorySample:
    position: np.ndarray  # x, y, z
    yaw: float
    velocity: np.ndarray
    yaw_rate: float
    acceleration: np.ndarray


def eval_trajectory(traj: Trajectory, t: float) -> TrajectorySample:
    lin = (traj.x, traj.y, traj.z)
    return TrajectorySample(
        position=np.array([a.value(t) for a in lin]),
        yaw=traj.yaw.value(t),
        velocity=np.array([a.rate(t) for a in lin]),
        yaw_rate=traj.yaw.rate(t),
        acceleration=np.array([a.accel(t) for a in lin]),
    )


def reference_state(traj: Trajectory, t: float, gravity: float = 9.81, attitude_feedforward: bool = True) -> np.ndarray:
    """Full 12-state reference; angle rates are zero, tilt angles follow from the small-angle relations."""
    s = eval_trajectory(traj, t)
    r = np.zeros(12)
    r[[X, Y, Z]] = s.position
    r[[XD, YD, ZD]] = s.velocity
    r[PSI] = s.yaw
    if attitude_feedforward:
        r[PHI] = s.acceleration[1] / gravity
        r[THETA] = -s.acceleration[0] / gravity
    return r


@dataclass(frozen=True)
class Exosystem:
    S: np.ndarray  # generator, s' = S s
    readout: np.ndarray  # 12 x n_s, x_ref = readout @ s
    frequencies: tuple[float, ...]

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def state_at(self, t: float) -> np.ndarray:
        s = [1.0]
        for w in self.frequencies:
            s += [math.cos(w * t), math.sin(w * t)]
        return np.array(s)


def exosystem(traj: Trajectory, gravity: float = 9.81, attitude_feedforward: bool = True) -> Exosystem:
    freqs = tuple(traj.frequencies())
    n_s = 1 + 2 * len(freqs)
    S = np.zeros((n_s, n_s))
    for i, w in enumerate(freqs):
        c, s = 1 + 2 * i, 2 + 2 * i
        S[c, s] = -w
        S[s, c] = w

    def rows(axis: AxisSignal):
        val, rate, acc = np.zeros(n_s), np.zeros(n_s), np.zeros(n_s)
        val[0] = axis.offset
        for h in axis.harmonics:
            i = freqs.index(h.omega)
            c, s = 1 + 2 * i, 2 + 2 * i
            val[c] += h.cos_amp
            val[s] += h.sin_amp
            rate[c] += h.omega * h.sin_amp
            rate[s] += -h.omega * h.cos_amp
            acc[c] += -h.omega ** 2 * h.cos_amp
            acc[s] += -h.omega ** 2 * h.sin_amp
        return val, rate, acc

    R = np.zeros((12, n_s))
    R[X], R[XD], acc_x = rows(traj.x)
    R[Y], R[YD], acc_y = rows(traj.y)
    R[Z], R[ZD], _ = rows(traj.z)
    if attitude_feedforward:
        R[THETA] = -acc_x / gravity
        R[PHI] = acc_y / gravity
    R[PSI] = rows(traj.yaw)[0]
    return Exosystem(S=S, readout=R, frequencies=freqs)
