"""Tracking RMSE and step-response characteristics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyWindow(ValueError):
    pass


class NotSettled(ValueError):
    pass


def rmse(series, reference, t=None, window: tuple[float, float] | None = None) -> float:
    """Root mean square of ``series - reference`` over samples with t in [t_a, t_b]."""
    err = np.asarray(series, dtype=float) - np.asarray(reference, dtype=float)
    if err.ndim != 1:
        raise ValueError("rmse expects 1-D signals")
    if window is not None:
        if t is None:
            raise ValueError("a window needs the sample times")
        t = np.asarray(t, dtype=float)
        if t.shape != err.shape:
            raise ValueError("t and series differ in length")
        ta, tb = window
        tol = 1e-9 * max(1.0, abs(tb))
        err = err[(t >= ta - tol) & (t <= tb + tol)]
    if err.size == 0:
        raise EmptyWindow(f"no samples in window {window}")
    return float(np.sqrt(np.mean(err * err)))


@dataclass(frozen=True)
class StepCharacteristics:
    rise_time: float
    settling_time: float
    settling_min: float
    settling_max: float
    overshoot: float  # percent
    peak: float
    peak_time: float
    rmse: float


def _crossing(t, y, level):
    """First time y reaches ``level`` (upward), linearly interpolated."""
    idx = np.flatnonzero(y >= level)
    if idx.size == 0:
        return np.nan
    i = idx[0]
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) / (y1 - y0) * (t[i] - t[i - 1]))


def step_characteristics(t, y, target: float, band: float = 0.02, y0: float = 0.0) -> StepCharacteristics:
    """Characteristics of a step from ``y0`` to ``target``.

    Rise time is 10% to 90% of the step, settling time the last exit from the
    +/- band * |step| envelope around the target (interpolated), overshoot
    the peak beyond target as a percentage of the step.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    step = target - y0
    if step == 0:
        raise ValueError("target equals the initial value")
    # work with an upward unit-normalised response
    yn = (y - y0) / step
    tail = yn[-max(1, len(yn) // 10):]
    if abs(tail.mean() - 1.0) > 3 * band:
        raise NotSettled(f"final mean {y0 + tail.mean() * step:.4g} is not near target {target:.4g}")

    t10 = _crossing(t, yn, 0.1)
    t90 = _crossing(t, yn, 0.9)
    rise = t90 - t10

    outside = np.flatnonzero(np.abs(yn - 1.0) > band)
    if outside.size == 0:
        settling = float(t[0])
    elif outside[-1] == len(yn) - 1:
        settling = np.nan
    else:
        i = outside[-1]
        # interpolate the re-entry between samples i and i + 1
        d0, d1 = abs(yn[i] - 1.0) - band, abs(yn[i + 1] - 1.0) - band
        settling = float(t[i] + d0 / (d0 - d1) * (t[i + 1] - t[i]))

    after = t >= t90 if np.isfinite(t90) else np.ones_like(t, dtype=bool)
    seg = y[after]
    k = int(np.argmax(yn))
    overshoot = max(float(yn[k]) - 1.0, 0.0) * 100.0
    return StepCharacteristics(
        rise_time=float(rise),
        settling_time=settling,
        settling_min=float(seg.min()) if seg.size else np.nan,
        settling_max=float(seg.max()) if seg.size else np.nan,
        overshoot=overshoot,
        peak=float(y[k]),
        peak_time=float(t[k]),
        rmse=rmse(y, np.full_like(y, target)),
    )


AXES = {"x": 0, "y": 2, "z": 4}


def tracking_rmse(t, x, x_ref, start: float = 0.0) -> dict[str, float]:
    """Per-axis position RMSE over [start, t_end]."""
    window = (start, float(t[-1]))
    return {axis: rmse(x[:, i], x_ref[:, i], t, window) for axis, i in AXES.items()}
