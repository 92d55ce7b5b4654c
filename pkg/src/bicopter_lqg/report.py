"""Summaries of finished runs and paired LQR/LQG comparisons."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lqg import Mode
from .metrics import AXES, NotSettled, StepCharacteristics, step_characteristics, tracking_rmse
from .scenarios import Scenario, ScenarioResult, run_scenario
from .trajectory import TrajectoryKind


@dataclass
class RunSummary:
    name: str
    mode: str
    status: str
    message: str
    rmse_full: dict[str, float]
    rmse_post: dict[str, float]
    post_start: float
    step: StepCharacteristics | None = None
    n_steps: int = 0

    def as_kv(self) -> dict[str, object]:
        kv: dict[str, object] = {"name": self.name, "mode": self.mode, "status": self.status,
                                 "message": self.message, "post_window_start": self.post_start,
                                 "integrator_steps": self.n_steps}
        for axis in AXES:
            kv[f"rmse_full_{axis}"] = self.rmse_full[axis]
            kv[f"rmse_post_{axis}"] = self.rmse_post[axis]
        if self.step is not None:
            for key, val in vars(self.step).items():
                kv[f"step_{key}"] = val
        return kv


def _inf_rmse() -> dict[str, float]:
    return {axis: float("inf") for axis in AXES}


def summarize(result: ScenarioResult) -> RunSummary:
    """RMSE over the whole run and over a post-transient window.

    The post-transient window starts one trajectory period in for periodic
    references and at the settling time for steps. A run that did not finish
    gets infinite RMSE.
    """
    s = result.scenario
    mode = s.controller.mode.value
    if not result.ok:
        return RunSummary(s.name, mode, result.status.value, result.message, _inf_rmse(), _inf_rmse(), np.nan,
                          n_steps=result.n_steps)
    t, x, ref = result.t, result.x, result.x_ref
    full = tracking_rmse(t, x, ref)
    step = None
    period = s.trajectory.period
    if s.trajectory.kind is TrajectoryKind.ALTITUDE_STEP:
        target, start = s.trajectory.z.offset, float(x[0, 4])
        try:
            step = step_characteristics(t, x[:, 4], target, y0=start)
            post_start = step.settling_time if np.isfinite(step.settling_time) else float(t[-1])
        except (NotSettled, ValueError):
            post_start = float(t[-1])
    elif period is not None and period < t[-1]:
        post_start = period
    else:
        post_start = 0.0
    post = tracking_rmse(t, x, ref, start=post_start)
    return RunSummary(s.name, mode, result.status.value, result.message, full, post, post_start, step,
                      result.n_steps)


@dataclass
class PairedComparison:
    seed: int
    lqr: RunSummary
    lqg: RunSummary

    def improvement(self, axis: str = "x", window: str = "full") -> float:
        """Relative RMSE reduction of LQG over LQR (positive means LQG is better)."""
        a = getattr(self.lqr, f"rmse_{window}")[axis]
        b = getattr(self.lqg, f"rmse_{window}")[axis]
        if not np.isfinite(b):
            return -np.inf
        return (a - b) / a


def paired_runs(scenario: Scenario, seed: int | None = None):
    """LQR and LQG runs of one scenario on the same noise realisation."""
    if seed is not None:
        scenario = replace(scenario, noise=replace(scenario.noise, seed=seed))
    lqr = run_scenario(scenario.with_mode(Mode.LQR_ONLY))
    lqg = run_scenario(scenario.with_mode(Mode.LQG))
    return lqr, lqg


def compare(scenario: Scenario, seeds) -> list[PairedComparison]:
    out = []
    for seed in seeds:
        lqr, lqg = paired_runs(scenario, seed)
        out.append(PairedComparison(seed, summarize(lqr), summarize(lqg)))
    return out


def format_comparison(rows: list[PairedComparison], window: str = "full") -> str:
    lines = [f"RMSE ({window} window)   LQR x     LQR y     LQG x     LQG y     dx %"]
    for r in rows:
        a = getattr(r.lqr, f"rmse_{window}")
        b = getattr(r.lqg, f"rmse_{window}")
        lines.append(f"seed {r.seed:<14d} {a['x']:9.4f} {a['y']:9.4f} {b['x']:9.4f} {b['y']:9.4f} "
                     f"{100 * r.improvement('x', window):8.1f}")
    return "\n".join(lines)


def format_step_table(summaries: list[RunSummary], labels: list[str]) -> str:
    rows = [("RiseTime (s)", "rise_time"), ("SettlingTime (s)", "settling_time"),
            ("SettlingMin", "settling_min"), ("SettlingMax", "settling_max"),
            ("Overshoot (%)", "overshoot"), ("RMSE", "rmse")]
    head = f"{'':18s}" + "".join(f"{lab:>12s}" for lab in labels)
    lines = [head]
    for title, key in rows:
        vals = "".join(f"{getattr(s.step, key):12.4f}" if s.step else f"{'n/a':>12s}" for s in summaries)
        lines.append(f"{title:18s}{vals}")
    return "\n".join(lines)
