"""Command-line entry point: validate, calibrate, gate and scan.

Exit codes: 0 ok, 2 validation (bad config, stale recipe), 3 calibration
failure, 4 any other runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationFailure,
    Simulator,
    chevron_coupling_scan,
    default_times,
    find_working_point,
)
from .config import ConfigError, RunConfig, load_config, paper_config_path
from .gates import (
    GateRecipe,
    RangeError,
    assemble_ccz,
    ccphase,
    ccphase_map,
    finish_recipe,
    gate_leakage_lindblad,
    gate_trajectory,
    gate_unitary,
)
from .hamiltonian import DISPERSIVE_LIMIT, DISPERSIVE_WARN, DispersiveError, resonance_shift, two_photon_J
from .io import read_json, write_grid, write_json, write_long, write_matrix, write_table, write_trajectory
from .metrics import leakage_from_unitary, leakage_scan, robustness_scan

EXIT_OK, EXIT_VALIDATION, EXIT_CALIBRATION, EXIT_RUNTIME = 0, 2, 3, 4
OUT_DIR_ENV = "CCZSIM_OUT_DIR"
SCAN_KINDS = ("robustness", "ccphase_map", "leakage")


class StaleRecipeError(ValueError):
    """Recipe was produced from a different config or model."""


# --- helpers -------------------------------------------------------------------


def _out_dir(args, cfg: RunConfig) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or cfg.section("outputs")["directory"]
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


def _simulator(cfg: RunConfig, model: str) -> Simulator:
    return Simulator(cfg.device_spec(model), cfg.pulse_config(model))


def _load_recipe(path: str, cfg: RunConfig, model: str) -> GateRecipe:
    doc = read_json(path)
    got = doc.get("provenance", {}).get("config_hash")
    if got != cfg.hash:
        raise StaleRecipeError(f"recipe {path} was calibrated for config {got}, current config is {cfg.hash}")
    if doc.get("model") != model:
        raise StaleRecipeError(f"recipe {path} was calibrated with the {doc.get('model')} model, not {model}")
    return GateRecipe.from_dict(doc["recipe"])


def _pair_name(pair) -> str:
    return "-".join(pair)


def validation_report(cfg: RunConfig) -> dict:
    """Derived quantities and invariant checks for the effective device."""
    spec = cfg.effective_spec()
    q1, q2, q3 = (spec.mode(q) for q in spec.qubits)
    checks = []
    for m in spec.modes:
        checks.append((f"{m.label} anharmonicity < 0", m.anharmonicity < 0))
        checks.append((f"{m.label} keeps |2>", m.levels >= 3))
    ratios = {}
    for (a, b), g in spec.couplings.items():
        det = abs(spec.mode(a).frequency - spec.mode(b).frequency)
        ratios[f"{a}-{b}"] = math.inf if det == 0 else abs(g) / det
    for name, r in ratios.items():
        note = " (above the soft limit)" if r > DISPERSIVE_WARN else ""
        checks.append((f"{name} dispersive |g/detuning| = {r:.4f} < {DISPERSIVE_LIMIT}{note}", r < DISPERSIVE_LIMIT))
    derived = {
        "bare_detuning_101_020_mhz": 1e3 * (q1.frequency + q3.frequency - 2 * q2.frequency - q2.anharmonicity),
        "omega2_prime_ghz": q2.frequency + q2.anharmonicity,
        "dispersive_ratios": ratios,
    }
    try:
        derived["J_two_photon_mhz"] = 1e3 * abs(two_photon_J(spec))
        shift, j = resonance_shift(spec)
        derived["resonance_shift_mhz"] = 1e3 * shift
        derived["J_anticrossing_mhz"] = 1e3 * j
    except (ValueError, ArithmeticError) as exc:
        checks.append((f"two-photon resonance ({exc})", False))
    return {"derived": derived, "checks": checks}


# --- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"FAIL {err}")
        return EXIT_VALIDATION
    rep = validation_report(cfg)
    d = rep["derived"]
    print(f"config {args.config} (hash {cfg.hash[:12]})")
    print(f"bare Delta(101<->020) = {d['bare_detuning_101_020_mhz']:.3f} MHz")
    print(f"omega2' / 2pi = {d['omega2_prime_ghz']:.4f} GHz")
    if "J_two_photon_mhz" in d:
        print(f"predicted |J| (two-photon formula) = {d['J_two_photon_mhz']:.4f} MHz")
        print(f"|J| at the dressed anticrossing = {d['J_anticrossing_mhz']:.4f} MHz "
              f"(Qubit 2 shift {d['resonance_shift_mhz']:.4f} MHz)")
    ok = True
    for name, passed in rep["checks"]:
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    sim = _simulator(cfg, args.model)
    cal = cfg.section("calibration")
    jobs = _jobs(args)
    h = cfg.hash

    for pair in sim.pairs:
        if sim.spec.flavor == "full":
            c = sim.spec.coupler_between(*pair)
            on = sim.spec.coupler_on[c] - sim.spec.mode(c).frequency
            controls = np.linspace(on, 0.0, 14)
        else:
            controls = np.linspace(0.0, 1.5, 16)
        chev = chevron_coupling_scan(sim, pair, controls)
        g = chev.grid
        name = f"chevron_{_pair_name(pair)}"
        write_grid(out / f"{name}.csv", g.x_name, g.x_values, g.y_name, g.y_values, g.values, h)
        write_long(out / f"{name}_long.csv", g.x_name, g.x_values, g.y_name, g.y_values, g.values, g.observable, h)
        write_table(out / f"{name}_fit.csv", ["control", "g_fit_ghz"], zip(g.x_values, chev.g_fit), h)

    times = default_times(sim.pulses.ramp_stage1, cal["time_max"], cal["time_points"])
    point, scan = find_working_point(
        sim, span=1e-3 * cal["shift_span_mhz"], points=cal["shift_points"], times=times, jobs=jobs
    )
    for grid in (scan.p_return, scan.phase):
        name = f"stage1_{grid.observable}"
        write_grid(out / f"{name}.csv", grid.x_name, grid.x_values, grid.y_name, grid.y_values, grid.values, h)
        write_long(out / f"{name}_long.csv", grid.x_name, grid.x_values, grid.y_name, grid.y_values,
                   grid.values, grid.observable, h)
    recipe = finish_recipe(sim, point)
    doc = {
        "model": args.model,
        "recipe": recipe.to_dict(),
        "detuning_101_020_ghz": sim.transition_detuning(point.delta_working),
        "pulses": vars(sim.pulses),
    }
    write_json(out / "recipe.json", doc, h)
    print(f"working point: Qubit 2 shift {1e3 * point.delta_working:.4f} MHz, "
          f"tau {point.tau_stage1:.3f} ns, p_return {point.p_return:.6f}")
    for c in recipe.cancellations:
        print(f"CPhase {_pair_name(c.pair)}: {c.duration:.3f} ns at {1e3 * c.detuning:.3f} MHz")
    print(f"total duration {recipe.total_duration:.3f} ns -> {out / 'recipe.json'}")
    return EXIT_OK


def _write_report(out: Path, stem: str, report, cfg_hash: str, extra: dict | None = None) -> None:
    write_json(out / f"{stem}.json", {**report.to_dict(), **(extra or {})}, cfg_hash)
    labels = ["".join(map(str, b)) for b in np.ndindex(2, 2, 2)]
    write_matrix(out / f"{stem.replace('report', 'matrix')}.csv", report.u_realized, labels, cfg_hash)


def cmd_gate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    sim = _simulator(cfg, args.model)
    recipe = _load_recipe(args.recipe, cfg, args.model)
    h = cfg.hash
    extra = {"model": args.model}
    if args.theta is not None and not math.isclose(args.theta, recipe.theta, abs_tol=1e-12):
        cal = cfg.section("calibration")
        cmap = ccphase_map(sim, recipe.stage1.delta_working, 1e-3 * cal["ccphase_span_mhz"],
                           cal["ccphase_points"], jobs=_jobs(args))
        report, recipe, _ = ccphase(sim, args.theta, cmap=cmap)
        write_json(out / "recipe_ccphase.json", {"model": args.model, "recipe": recipe.to_dict()}, h)
        extra["measured_theta"] = report.phases.phi13
    report = assemble_ccz(sim, recipe, standard_basis=args.standard_basis)
    noise = cfg.noise()
    if not noise.empty:
        extra["leakage_lindblad"] = gate_leakage_lindblad(sim, recipe, noise).to_dict()
        extra["noise"] = noise.to_dict()
    _write_report(out, "report", report, h, extra)
    times = np.linspace(0.0, recipe.total_duration, 401)
    write_trajectory(out / "trajectory.csv", times, gate_trajectory(sim, recipe, times), h)
    print(f"fidelity {report.fidelity:.6f} (standard basis {report.fidelity_standard:.6f}), "
          f"duration {report.duration:.3f} ns, leakage L011+L110 {report.leakage.total:.3e}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    sim = _simulator(cfg, args.model)
    recipe = _load_recipe(args.recipe, cfg, args.model)
    jobs, h = _jobs(args), cfg.hash

    if args.kind == "robustness":
        rob = cfg.section("robustness")
        grid = robustness_scan(sim, recipe, tuple(rob["delta_range"]), tuple(rob["zeta_range_mhz"]),
                               tuple(rob["grid"]), jobs)
        write_grid(out / "robustness.csv", "delta", grid.delta_values, "zeta_mhz", grid.zeta_values, grid.fidelity, h)
        write_long(out / "robustness_long.csv", "delta", grid.delta_values, "zeta_mhz", grid.zeta_values,
                   grid.fidelity, "fidelity", h)
        summary = grid.summary()
        write_json(out / "robustness.json", summary, h)
        print(f"robustness: min {summary['min']:.4f} at {summary['argmin']}, nominal {summary['nominal']:.4f}, "
              f"{len(summary['dips'])} dip(s)")
    elif args.kind == "ccphase_map":
        cal = cfg.section("calibration")
        cmap = ccphase_map(sim, recipe.stage1.delta_working, 1e-3 * cal["ccphase_span_mhz"],
                           cal["ccphase_points"], jobs=jobs)
        rows = [(d, sim.transition_detuning(d), t, th, p)
                for d, t, th, p in zip(cmap.deltas, cmap.taus, cmap.thetas, cmap.p_return)]
        write_table(out / "ccphase_map.csv",
                    ["shift_ghz", "detuning_101_020_ghz", "tau_ns", "theta_rad", "p_return"], rows, h)
        k = int(np.argmin(np.abs(cmap.thetas - np.pi)))
        summary = {
            "monotone": cmap.monotone,
            "theta_range": [float(cmap.thetas.min()), float(cmap.thetas.max())],
            "step_ghz": cmap.step,
            "theta_pi_shift_ghz": float(cmap.deltas[k]),
            "working_shift_ghz": recipe.stage1.delta_working,
        }
        write_json(out / "ccphase_map.json", summary, h)
        print(f"ccphase map: theta in [{summary['theta_range'][0]:.3f}, {summary['theta_range'][1]:.3f}] rad, "
              f"monotone {cmap.monotone}")
    else:
        cal = cfg.section("calibration")
        shifts = recipe.stage1.delta_working + np.linspace(-2e-3, 2e-3, 21)
        times = default_times(sim.pulses.ramp_stage1, cal["time_max"], cal["time_points"])
        lmap = leakage_scan(sim, shifts, times, jobs)
        for name, vals in (("leakage_011", lmap.l011), ("leakage_110", lmap.l110), ("leakage_total", lmap.total)):
            write_grid(out / f"{name}.csv", "shift_ghz", shifts, "time_ns", times, vals, h)
        rows = ((d, t, lmap.l011[i, j], lmap.l110[i, j], lmap.total[i, j])
                for i, t in enumerate(times) for j, d in enumerate(shifts))
        write_table(out / "leakage_long.csv", ["shift_ghz", "time_ns", "L011", "L110", "total"], rows, h)
        d_opt, t_opt, l_opt = lmap.optimum()
        gate = leakage_from_unitary(gate_unitary(sim, recipe), sim.spec.space)
        summary = {
            "optimum": {"shift_ghz": d_opt, "time_ns": t_opt, "total": l_opt},
            "working_point": {"shift_ghz": recipe.stage1.delta_working, "time_ns": recipe.stage1.tau_stage1},
            "gate": gate.to_dict(),
        }
        write_json(out / "leakage.json", summary, h)
        print(f"leakage at the working point (full gate): {gate.total:.3e}; scan minimum {l_opt:.3e}")
    return EXIT_OK


# --- entry ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(paper_config_path()), help="JSON run config (default: shipped paper.json)")
    common.add_argument("--out-dir", default=None, help=f"output directory (default: ${OUT_DIR_ENV} or config)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps (default: all cores)")
    common.add_argument("--model", choices=("effective", "full"), default="effective")

    parser = argparse.ArgumentParser(prog="cczsim", description="Direct CCZ gate pulse simulator.")
    parser.add_argument("--version", action="version", version=f"cczsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a config and print derived quantities")
    sub.add_parser("calibrate", parents=[common], help="find the working point and write recipe.json")
    gate = sub.add_parser("gate", parents=[common], help="assemble the gate from a recipe")
    gate.add_argument("--recipe", required=True)
    gate.add_argument("--theta", type=float, default=None, help="CCPhase angle in rad (default: the recipe's)")
    gate.add_argument("--standard-basis", action="store_true", help="report the X2-conjugated gate (-1 on |111>)")
    scan = sub.add_parser("scan", parents=[common], help="robustness, CCPhase map or leakage scans")
    scan.add_argument("kind", choices=SCAN_KINDS)
    scan.add_argument("--recipe", required=True)
    return parser


COMMANDS = {"validate": cmd_validate, "calibrate": cmd_calibrate, "gate": cmd_gate, "scan": cmd_scan}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, StaleRecipeError, DispersiveError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CalibrationFailure as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_CALIBRATION
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except Exception as exc:  # noqa: BLE001 - top-level guard maps to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
