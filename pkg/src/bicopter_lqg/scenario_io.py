"""Flat ``key = value`` scenario files.

Blank lines and ``#`` comments are ignored. Recognised keys (all optional)::

    name            run name, used for the output directory
    trajectory      altitude_step | circle | figure8 | custom
    altitude, yaw   reference altitude (m) and heading (rad)
    radius, omega   circle radius (m) and angular rate (rad/s)
    x_amp, y_amp    figure-8 amplitudes (m); omega is its base rate
    traj.x, traj.y, traj.z, traj.yaw
                    custom axis signals, e.g. ``2 + 0.5*sin(1.2) - 0.1*cos(3)``
    duration, sample_dt
    mode            lqr | lqg
    k_synthesis     paper | separation
    noise_input     paper | identity
    b_sign          corrected | printed
    attitude_feedforward   true | false
    Q, R, W, V      controller weights (matrix syntax below)
    noise           on | off
    noise.W, noise.V       simulated process / measurement covariances
    seed
    mass, gravity, rotor_offset, arm, thrust_coeff, ixx, iyy, izz
    payload         none | table (0.2 kg, 8 cm cube)
    payload.mass, payload.length, payload.width, payload.height
    attach_time, payload_adds_mass
    initial_state   12 numbers
    observer_init   measurement | true
    solver          adaptive | rk4
    rk4_dt, rk4_relin_dt, rel_tol, abs_tol, h_init, h_min, h_max, max_steps

Matrices: ``I``, ``700*I``, ``CtC`` (C^T C of the output matrix, i.e. I),
``0.5*CtC``, ``diag(1, 2, 3)``, or rows ``[1 0; 0 1]``. The size follows
from the key (R is 4x4, the rest 12x12).
"""

from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

import numpy as np

from .integrator import IntegratorConfig
from .lqg import KSynthesis, Mode
from .plant import TABLE_PAYLOAD, BicopterParams, InertiaMatrix, InvalidParameter, PayloadSpec
from .scenarios import ControllerConfig, NoiseSpec, Scenario
from .trajectory import AxisSignal, Harmonic, Trajectory, TrajectoryKind, altitude_step, circle, figure8


class ScenarioFileError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


MATRIX_SIZES = {"Q": 12, "R": 4, "W": 12, "V": 12, "noise.W": 12, "noise.V": 12}
KNOWN_KEYS = {
    "name", "trajectory", "altitude", "yaw", "radius", "omega", "x_amp", "y_amp",
    "traj.x", "traj.y", "traj.z", "traj.yaw", "duration", "sample_dt", "mode", "k_synthesis", "noise_input",
    "b_sign", "attitude_feedforward", "noise", "seed", "mass", "gravity", "rotor_offset", "arm",
    "thrust_coeff", "ixx", "iyy", "izz", "payload", "payload.mass", "payload.length", "payload.width",
    "payload.height", "attach_time", "payload_adds_mass", "initial_state", "observer_init", "solver",
    "rk4_dt", "rk4_relin_dt", "rel_tol", "abs_tol", "h_init", "h_min", "h_max", "max_steps",
} | set(MATRIX_SIZES)


def read_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioFileError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ScenarioFileError(key, "unknown key")
        out[key] = value
    return out


def parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ScenarioFileError(key, f"not a number: {value!r}") from None


def parse_bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ScenarioFileError(key, f"not a boolean: {value!r}")


_SCALED = re.compile(r"^(?:([-+0-9.eE]+)\s*\*\s*)?(I|CtC)$")


def parse_matrix(key: str, value: str, size: int | None = None) -> np.ndarray:
    n = size or MATRIX_SIZES.get(key, 12)
    v = value.strip()
    m = _SCALED.match(v.replace(" ", ""))
    if m:
        scale = parse_float(key, m.group(1)) if m.group(1) else 1.0
        return scale * np.eye(n)
    if v.startswith("diag(") and v.endswith(")"):
        entries = [parse_float(key, e) for e in re.split(r"[,\s]+", v[5:-1].strip()) if e]
        if len(entries) != n:
            raise ScenarioFileError(key, f"diag needs {n} entries, got {len(entries)}")
        return np.diag(entries)
    if v.startswith("[") and v.endswith("]"):
        rows = [[parse_float(key, e) for e in re.split(r"[,\s]+", r.strip()) if e] for r in v[1:-1].split(";")]
        M = np.array(rows, dtype=float)
        if M.shape != (n, n):
            raise ScenarioFileError(key, f"expected a {n}x{n} matrix, got shape {M.shape}")
        return M
    raise ScenarioFileError(key, f"unrecognised matrix syntax {value!r}")


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(rf"([+-]?)(?:(?:({_NUM})\*)?(cos|sin)\(({_NUM})\)|({_NUM}))")


def parse_axis(key: str, value: str) -> AxisSignal:
    """``c0 + a*cos(w) + b*sin(w) ...`` where w is the angular rate in rad/s."""
    text = re.sub(r"\s*([-+*()])\s*", r"\1", value.strip())
    if not text:
        raise ScenarioFileError(key, "empty signal")
    offset = 0.0
    harmonics: list[Harmonic] = []
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (pos > 0 and not m.group(1)):
            raise ScenarioFileError(key, f"cannot parse signal at {text[pos:]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        if m.group(3):
            amp = sign * (float(m.group(2)) if m.group(2) else 1.0)
            omega = float(m.group(4))
            try:
                h = Harmonic(omega, cos_amp=amp) if m.group(3) == "cos" else Harmonic(omega, sin_amp=amp)
            except ValueError as exc:
                raise ScenarioFileError(key, str(exc)) from None
            harmonics.append(h)
        else:
            offset += sign * float(m.group(5))
        pos = m.end()
    return AxisSignal(offset, tuple(harmonics))


def _trajectory(kv: dict[str, str]) -> Trajectory:
    kind = kv.get("trajectory", "altitude_step").lower()
    num = lambda k, d: parse_float(k, kv[k]) if k in kv else d  # noqa: E731
    altitude, yaw = num("altitude", 2.0), num("yaw", 0.0)
    if kind == TrajectoryKind.ALTITUDE_STEP.value:
        return altitude_step(altitude, yaw)
    if kind == TrajectoryKind.CIRCLE.value:
        return circle(num("radius", 1.3), num("omega", np.pi), altitude, yaw)
    if kind == TrajectoryKind.FIGURE8.value:
        return figure8(num("x_amp", 1.0), num("y_amp", 1.0), num("omega", 0.25 * np.pi), altitude, yaw)
    if kind == TrajectoryKind.CUSTOM.value:
        axes = {a: parse_axis(f"traj.{a}", kv[f"traj.{a}"]) if f"traj.{a}" in kv else AxisSignal()
                for a in ("x", "y", "z", "yaw")}
        if "traj.z" not in kv:
            axes["z"] = AxisSignal(altitude)
        return Trajectory(TrajectoryKind.CUSTOM, **axes)
    raise ScenarioFileError("trajectory", f"unknown kind {kind!r}")


def _choice(kv, key, options, default):
    v = kv.get(key, default).lower()
    if v not in options:
        raise ScenarioFileError(key, f"must be one of {sorted(options)}, got {v!r}")
    return v


def scenario_from_kv(kv: dict[str, str], default_name: str = "scenario") -> Scenario:
    num = lambda k, d: parse_float(k, kv[k]) if k in kv else d  # noqa: E731
    base = BicopterParams()
    J0 = base.inertia
    params = BicopterParams(
        mass=num("mass", base.mass), gravity=num("gravity", base.gravity),
        rotor_offset=num("rotor_offset", base.rotor_offset), arm=num("arm", base.arm),
        thrust_coeff=num("thrust_coeff", base.thrust_coeff),
        inertia=InertiaMatrix(num("ixx", J0.ixx), num("iyy", J0.iyy), num("izz", J0.izz)),
    )

    mode = Mode(_choice(kv, "mode", {"lqr", "lqg"}, "lqg"))
    cc = ControllerConfig(
        mode=mode,
        k_synthesis=KSynthesis(_choice(kv, "k_synthesis", {"paper", "separation"}, "paper")),
        noise_input=_choice(kv, "noise_input", {"paper", "identity"}, "paper"),
        b_sign_corrected=_choice(kv, "b_sign", {"corrected", "printed"}, "corrected") == "corrected",
        attitude_feedforward=parse_bool("attitude_feedforward", kv.get("attitude_feedforward", "true")),
    )
    cc = replace(cc, **{k: parse_matrix(k, kv[k]) for k in ("Q", "R", "W", "V") if k in kv})

    noise = NoiseSpec(enabled=parse_bool("noise", kv.get("noise", "off")), seed=int(num("seed", 0)))
    if "noise.W" in kv:
        noise = replace(noise, process_cov=parse_matrix("noise.W", kv["noise.W"]))
    if "noise.V" in kv:
        noise = replace(noise, measurement_cov=parse_matrix("noise.V", kv["noise.V"]))

    payload = None
    pl = kv.get("payload", "none").lower()
    if pl == "table":
        payload = TABLE_PAYLOAD
    elif pl != "none":
        raise ScenarioFileError("payload", f"must be 'none' or 'table', got {pl!r}")
    if any(k.startswith("payload.") for k in kv):
        p0 = payload or TABLE_PAYLOAD
        payload = PayloadSpec(num("payload.mass", p0.mass), num("payload.length", p0.length),
                              num("payload.width", p0.width), num("payload.height", p0.height))

    cfg0 = IntegratorConfig()
    integ = IntegratorConfig(
        rel_tol=num("rel_tol", cfg0.rel_tol), abs_tol=num("abs_tol", cfg0.abs_tol),
        h_init=num("h_init", cfg0.h_init), h_min=num("h_min", cfg0.h_min), h_max=num("h_max", cfg0.h_max),
        max_steps=int(num("max_steps", cfg0.max_steps)),
    )
    init = None
    if "initial_state" in kv:
        vals = [parse_float("initial_state", e) for e in re.split(r"[,\s]+", kv["initial_state"].strip("[] ")) if e]
        if len(vals) != 12:
            raise ScenarioFileError("initial_state", f"needs 12 numbers, got {len(vals)}")
        init = np.array(vals)

    kw = {}
    if "duration" in kv:
        kw["duration"] = num("duration", None)
    try:
        return Scenario(
            name=kv.get("name", default_name), trajectory=_trajectory(kv), controller=cc, params=params,
            payload=payload, attach_time=num("attach_time", 0.0),
            payload_adds_mass=parse_bool("payload_adds_mass", kv.get("payload_adds_mass", "false")),
            initial_state=init, observer_init=_choice(kv, "observer_init", {"measurement", "true"}, "measurement"),
            integrator=integ, solver=_choice(kv, "solver", {"adaptive", "rk4"}, "adaptive"),
            rk4_dt=num("rk4_dt", 1e-4), rk4_relin_dt=num("rk4_relin_dt", 1e-3),
            sample_dt=num("sample_dt", 0.01), noise=noise, **kw,
        )
    except InvalidParameter:
        raise
    except ValueError as exc:
        raise ScenarioFileError("scenario", str(exc)) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        kv = read_kv(path.read_text())
    except OSError as exc:
        raise ScenarioFileError(str(path), f"cannot read: {exc.strerror}") from None
    return scenario_from_kv(kv, default_name=path.stem)
