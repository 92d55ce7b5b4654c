"""Command line front end: ``run``, ``gains`` and ``validate``.

Exit codes: 0 success, 1 validation failure (bad file, failed check),
2 runtime failure (synthesis or integration error).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .linear_model import build_linear_model, controllability_rank, dump_model, observability_rank
from .lqg import KSynthesis, Mode, export_gains
from .plant import (STATE_NAMES, InvalidParameter, actuator_forward, actuator_inverse, hover_input, jacobians,
                    nonlinear_derivative)
from .report import PairedComparison, format_comparison, format_step_table, summarize
from .riccati import RiccatiError, spectral_abscissa
from .scenario_io import load_scenario
from .scenarios import Q_VARIANTS, Scenario, ScenarioResult, Status, build_controller, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

CSV_COLUMNS = (
    ["t"] + list(STATE_NAMES) + [f"{n}_hat" for n in STATE_NAMES] + [f"{n}_ref" for n in STATE_NAMES]
    + ["u1", "u2", "u3", "u4", "omega_R", "omega_L", "gamma_R", "gamma_L"]
)


def write_timeseries(path: Path, result: ScenarioResult) -> None:
    n = len(result.t)
    x_hat = result.x_hat if result.x_hat is not None else np.full((n, 12), np.nan)
    table = np.column_stack([result.t, result.x, x_hat, result.x_ref, result.u, result.rotor]) if n else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in table:
            w.writerow([repr(float(v)) for v in row])


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_summary(directory: Path, result: ScenarioResult) -> dict:
    summary = summarize(result)
    kv = summary.as_kv()
    with open(directory / "summary.kv", "w") as fh:
        for k, v in kv.items():
            fh.write(f"{k} = {_fmt(v)}\n")
    lines = [f"scenario   {summary.name}", f"controller {summary.mode}", f"status     {summary.status}"]
    if summary.message:
        lines.append(f"message    {summary.message}")
    lines.append("")
    lines.append(f"{'RMSE (m)':12s}{'full run':>12s}{'post':>12s}")
    for axis in ("x", "y", "z"):
        lines.append(f"{axis:12s}{summary.rmse_full[axis]:12.4f}{summary.rmse_post[axis]:12.4f}")
    lines.append(f"post window starts at t = {summary.post_start:.4g} s")
    if summary.step is not None:
        lines.append("")
        lines.append(format_step_table([summary], ["step"]))
    (directory / "summary.txt").write_text("\n".join(lines) + "\n")
    return kv


def apply_overrides(s: Scenario, args) -> Scenario:
    cc = s.controller
    if getattr(args, "k_synthesis", None):
        cc = replace(cc, k_synthesis=KSynthesis(args.k_synthesis))
    if getattr(args, "b_sign", None):
        cc = replace(cc, b_sign_corrected=args.b_sign == "corrected")
    s = replace(s, controller=cc)
    if getattr(args, "seed", None) is not None:
        s = replace(s, noise=replace(s.noise, seed=args.seed))
    return s


def _load(paths, args, err) -> list[Scenario] | None:
    out = []
    for p in paths:
        try:
            out.append(apply_overrides(load_scenario(p), args))
        except InvalidParameter as exc:
            print(f"error: {p}: invalid parameter {exc.field}: {exc}", file=err)
            return None
        except ValueError as exc:
            print(f"error: {p}: {exc}", file=err)
            return None
    return out


def _run_one(s: Scenario, out_dir: Path, out, err) -> ScenarioResult:
    directory = out_dir / s.name
    directory.mkdir(parents=True, exist_ok=True)
    result = run_scenario(s)
    write_timeseries(directory / "timeseries.csv", result)
    write_summary(directory, result)
    print(f"{s.name}: {result.status.value}" + (f" ({result.message})" if result.message else ""), file=out)
    return result


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenarios = _load(args.scenarios, args, err)
    if scenarios is None:
        return EXIT_INVALID
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out_dir}: {exc.strerror}", file=err)
        return EXIT_INVALID

    failed = False
    for s in scenarios:
        if args.q_sweep:
            summaries, labels = [], []
            for q in Q_VARIANTS:
                sq = replace(s, name=f"{s.name}_q{q:g}", controller=replace(s.controller, Q=q * np.eye(12)))
                r = _run_one(sq, out_dir, out, err)
                failed |= r.status in (Status.SYNTHESIS_FAILED, Status.INTEGRATION_FAILED)
                summaries.append(summarize(r))
                labels.append(f"{q:g}*CtC")
            table = format_step_table(summaries, labels)
            (out_dir / f"{s.name}_q_sweep.txt").write_text(table + "\n")
            print(table, file=out)
        elif args.compare:
            seeds = [s.noise.seed + i for i in range(args.seeds)]
            rows = []
            for seed in seeds:
                sd = replace(s, noise=replace(s.noise, seed=seed))
                pair = []
                for mode in (Mode.LQR_ONLY, Mode.LQG):
                    sm = replace(sd.with_mode(mode), name=f"{s.name}_{mode.value}_seed{seed}")
                    r = _run_one(sm, out_dir, out, err)
                    failed |= r.status in (Status.SYNTHESIS_FAILED, Status.INTEGRATION_FAILED)
                    pair.append(summarize(r))
                rows.append(PairedComparison(seed, pair[0], pair[1]))
            text = format_comparison(rows, "full") + "\n\n" + format_comparison(rows, "post")
            (out_dir / f"{s.name}_comparison.txt").write_text(text + "\n")
            print(text, file=out)
        else:
            r = _run_one(s, out_dir, out, err)
            failed |= r.status in (Status.SYNTHESIS_FAILED, Status.INTEGRATION_FAILED)
    return EXIT_RUNTIME if failed else EXIT_OK


def _eig_lines(label: str, M: np.ndarray) -> list[str]:
    ev = np.linalg.eigvals(M)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    lines = [f"eig({label}), sorted by real part:"]
    lines += [f"  {e.real: .6e} {e.imag:+.6e}j" for e in ev]
    return lines


def cmd_gains(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenarios = _load([args.scenario], args, err)
    if scenarios is None:
        return EXIT_INVALID
    s = scenarios[0]
    try:
        ctl = build_controller(s)
    except (RiccatiError, ValueError, RuntimeError) as exc:
        print(f"error: synthesis failed: {type(exc).__name__}: {exc}", file=err)
        return EXIT_RUNTIME
    m = ctl.model
    with np.printoptions(precision=6, linewidth=160):
        k_text, l_text = np.array2string(ctl.K), np.array2string(ctl.L)
    lines = [
        f"scenario {s.name}, mode {ctl.mode.value}, k_synthesis {ctl.k_synthesis.value}",
        f"controllability rank {controllability_rank(m)}/{m.n_states}",
        f"observability rank {observability_rank(m)}/{m.n_states}",
        f"regulator CARE residual {ctl.k_residual:.3e}",
        f"filter CARE residual {ctl.l_residual:.3e}",
        "K =", k_text,
        "L =", l_text,
    ]
    lines += _eig_lines("A - B K", ctl.regulator_matrix())
    lines += _eig_lines("A - L C", ctl.observer_matrix())
    print("\n".join(lines), file=out)
    if args.out:
        export_gains(ctl, args.out)
        dump_model(m, args.out)
    return EXIT_OK


def run_checks(s: Scenario) -> list[tuple[str, bool, str]]:
    """Invariant checks that need no simulation. Each entry is (name, passed, detail)."""
    checks = []
    p = s.params
    u0 = hover_input(p)
    f0 = nonlinear_derivative(np.zeros(12), u0, p)
    checks.append(("hover fixed point", bool(np.all(f0 == 0.0)), f"max |f| = {np.abs(f0).max():.3e}"))

    rt = actuator_forward(actuator_inverse(u0, p), p)
    err = float(np.abs(rt - u0).max())
    checks.append(("actuator round trip", err < 1e-12, f"error {err:.3e}"))

    model = build_linear_model(p, s.controller.b_sign_corrected)
    fx, fu = jacobians(np.zeros(12), u0, p)
    # the hover model keeps u3 only in the pitch row; its lateral-thrust
    # entries in the x and y accelerations are reported, not checked
    lateral = np.zeros_like(fu, dtype=bool)
    lateral[[1, 3], 2] = True
    du = np.where(lateral, 0.0, fu - model.B)
    lin_err = max(float(np.abs(fx - model.A).max()), float(np.abs(du).max()))
    checks.append(("hover Jacobian matches linear model", lin_err < 1e-9 or not s.controller.b_sign_corrected,
                   f"max difference {lin_err:.3e}, dropped u3 lateral terms "
                   f"{fu[1, 2]:+.4g}, {fu[3, 2]:+.4g}"))
    rc, ro = controllability_rank(model), observability_rank(model)
    checks.append(("controllable", rc == model.n_states, f"rank {rc}/{model.n_states}"))
    checks.append(("observable", ro == model.n_states, f"rank {ro}/{model.n_states}"))

    try:
        ctl = build_controller(s)
    except (RiccatiError, ValueError, RuntimeError) as exc:
        checks.append(("controller synthesis", False, f"{type(exc).__name__}: {exc}"))
        return checks
    q_tol = 1e-8 * max(1.0, np.linalg.norm(s.controller.Q))
    res_k = ctl.k_residual
    checks.append(("regulator CARE residual", res_k <= q_tol, f"{res_k:.3e} (tol {q_tol:.1e})"))
    w_tol = 1e-8 * max(1.0, np.linalg.norm(ctl.filter_cov))
    res_l = ctl.l_residual
    checks.append(("filter CARE residual", res_l <= w_tol, f"{res_l:.3e} (tol {w_tol:.1e})"))
    a_k = spectral_abscissa(ctl.regulator_matrix())
    a_l = spectral_abscissa(ctl.observer_matrix())
    checks.append(("A - B K Hurwitz", a_k < 0, f"spectral abscissa {a_k:.4g}"))
    checks.append(("A - L C Hurwitz", a_l < 0, f"spectral abscissa {a_l:.4g}"))
    return checks


def cmd_validate(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenarios = _load([args.scenario], args, err)
    if scenarios is None:
        return EXIT_INVALID
    checks = run_checks(scenarios[0])
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    failed = [c for c in checks if not c[1]]
    if failed:
        print(f"{len(failed)} check(s) failed", file=err)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bicopter-lqg", description="Bicopter LQR/LQG simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="override the noise seed")
        p.add_argument("--k-synthesis", choices=[k.value for k in KSynthesis], help="feedback gain synthesis")
        p.add_argument("--b-sign", choices=["corrected", "printed"], help="sign of the thrust entry of B")

    run = sub.add_parser("run", help="simulate scenarios and write time series and summaries")
    run.add_argument("scenarios", nargs="+", help="scenario files")
    run.add_argument("--out", "-o", default="out", help="output directory")
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--compare", action="store_true", help="paired LQR/LQG runs on the same noise")
    mode.add_argument("--q-sweep", action="store_true", help="run the five Q weight variants")
    run.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds for --compare")
    common(run)
    run.set_defaults(func=cmd_run)

    gains = sub.add_parser("gains", help="print gains, residuals and closed-loop eigenvalues")
    gains.add_argument("scenario")
    gains.add_argument("--out", "-o", help="also write K, L and the model matrices here")
    common(gains)
    gains.set_defaults(func=cmd_gains)

    val = sub.add_parser("validate", help="check model and synthesis invariants without simulating")
    val.add_argument("scenario")
    common(val)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
