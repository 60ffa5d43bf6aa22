"""End-to-end acceptance criteria; each test records one PASS/FAIL line for the summary."""

import math

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from cczsim.calibration import measure_conditional_phases, wrap
from cczsim.dynamics import (
    NoiseSpec,
    QuantumState,
    evolve_lindblad,
    flat_top,
    propagate_states,
    propagate_unitary,
    unitarity_defect,
)
from cczsim.gates import apply_virtual_z, assemble_ccz, ccphase_point, to_standard_ccz
from cczsim.hamiltonian import project_101_020
from cczsim.hilbert import basis_index, basis_state, dimension
from cczsim.metrics import average_gate_fidelity
from conftest import ACCEPTANCE_LIMITS as LIM


def two_level_populations(sim, sched, times, dt=0.05):
    """P101 and P020 from the exact 2x2 model driven along ``sched`` (model units: rad/ns)."""
    psi = np.array([1.0, 0.0], dtype=complex)
    out = np.zeros((len(times), 2))
    t, k = 0.0, 0
    while k < len(times):
        while k < len(times) and times[k] <= t + 1e-12:
            out[k] = np.abs(psi) ** 2
            k += 1
        h = project_101_020(sim.model.hamiltonian(sched.values(t + 0.5 * dt)), sim.spec.space, exact=True)
        h = h - 0.5 * np.trace(h) * np.eye(2)
        psi = expm(-1j * h * dt) @ psi
        t += dt
    return out


def test_criterion_1_working_point(calibrated, record):
    p = calibrated.point
    ok = p.p_return >= LIM["p_return"] and LIM["tau"][0] <= p.tau_stage1 <= LIM["tau"][1]
    ok = ok and calibrated.seconds <= LIM["calibration_seconds"]
    record(1, ok, f"p_return {p.p_return:.6f}, tau {p.tau_stage1:.2f} ns, calibration {calibrated.seconds:.0f} s")
    assert ok


def test_criterion_2_fidelity(sim, recipe, record):
    rep = assemble_ccz(sim, recipe)
    ok = rep.fidelity >= LIM["fidelity"] and rep.duration <= LIM["duration"]
    record(2, ok, f"F {rep.fidelity:.5f}, duration {rep.duration:.2f} ns")
    assert ok


def test_criterion_3_cphase_durations(recipe, record):
    got = {c.pair: c.duration for c in recipe.cancellations}
    ok = all(abs(got[pair] / ref - 1) <= LIM["cphase_rel"] for pair, ref in LIM["cphase_ns"].items())
    detail = ", ".join(f"{'-'.join(pair)} {got[pair]:.2f} ns (ref {ref})" for pair, ref in LIM["cphase_ns"].items())
    record(3, ok, detail)
    assert ok


def test_criterion_4_robustness(robustness, record):
    grid = robustness.value
    ok = grid.minimum >= LIM["robust_min"] and robustness.seconds <= LIM["robust_seconds"]
    record(4, ok, f"11x11 minimum {grid.minimum:.4f} at {grid.argmin}, nominal {grid.nominal:.4f}, "
                  f"{robustness.seconds:.0f} s")
    assert ok


def test_criterion_5_leakage(sim, recipe, record):
    rep = assemble_ccz(sim, recipe)
    ok = rep.leakage.total <= LIM["leakage"]
    record(5, ok, f"L011 + L110 = {rep.leakage.total:.3e}")
    assert ok


def test_criterion_6_ccphase_map(sim, recipe, cmap, record):
    point = ccphase_point(sim, cmap, math.pi)
    gap = abs(point.delta_working - recipe.stage1.delta_working)
    ok = cmap.monotone and gap <= abs(cmap.step)
    record(6, ok, f"monotone {cmap.monotone}, theta in [{cmap.thetas.min():.3f}, {cmap.thetas.max():.3f}], "
                  f"pi point off by {1e3 * gap:.4f} MHz (step {1e3 * abs(cmap.step):.3f} MHz)")
    assert ok


def test_criterion_7_oracle_equivalence(sim, calibrated, full_calibrated, record):
    sched = sim.stage1_schedule(calibrated.point)
    times = np.linspace(0.0, sched.total, 181)
    space = sim.spec.space
    states = propagate_states(sim.model, sched, QuantumState.basis((1, 0, 1), space).data, times)
    pops = np.abs(states[:, [basis_index((1, 0, 1), space), basis_index((0, 2, 0), space)]]) ** 2
    dev = float(np.max(np.abs(pops - two_level_populations(sim, sched, times))))
    f_eff = assemble_ccz(sim, calibrated.recipe).fidelity
    f_full = assemble_ccz(full_calibrated.sim, full_calibrated.recipe).fidelity
    ok = dev <= LIM["oracle_pop"] and abs(f_full - f_eff) <= LIM["model_fidelity"]
    record(7, ok, f"max |P - P_2level| {dev:.4f}, F effective {f_eff:.5f} vs full {f_full:.5f}")
    assert ok


def test_criterion_8_properties(sim, calibrated, record):
    space = sim.spec.space
    checks = {}
    u = propagate_unitary(sim.model, sim.stage1_schedule(calibrated.point))
    checks["unitarity"] = unitarity_defect(u) <= 1e-7

    short = flat_top(sim.stage1_amplitudes(calibrated.point.delta_working), 20.0, 20.0, sim.dt)
    noise = NoiseSpec({q: 5000.0 for q in sim.qubits}, {q: 3000.0 for q in sim.qubits})
    psi = np.ones(dimension(space)) / math.sqrt(dimension(space))
    traj = evolve_lindblad(psi, sim.model, short, noise, times=np.linspace(0.0, short.total, 5))
    checks["lindblad trace"] = max(abs(np.trace(s.data) - 1.0) for s in traj) <= 1e-7

    w = unitary_group.rvs(8, random_state=5)
    checks["F(U,U)"] = abs(average_gate_fidelity(w, w) - 1.0) <= 1e-12
    phases = np.random.default_rng(5).uniform(-np.pi, np.pi, 3)
    checks["VZ magnitudes"] = np.allclose(np.abs(apply_virtual_z(w, phases)), np.abs(w), atol=1e-15)
    checks["X2 involution"] = np.array_equal(to_standard_ccz(to_standard_ccz(w)), w)

    ph = measure_conditional_phases(sim, sim.to_frame(u))
    p = {b: sim.phase(sim.to_frame(u), b) for b in np.ndindex(2, 2, 2)}
    direct = p[1, 1, 1] - p[1, 0, 0] - p[0, 1, 0] - p[0, 0, 1] + 2 * p[0, 0, 0]
    checks["phase composition"] = abs(wrap(ph.phi111 - direct)) <= 1e-6
    checks["encode/decode"] = all(basis_index(basis_state(i, space), space) == i for i in range(dimension(space)))

    failed = [k for k, v in checks.items() if not v]
    record(8, not failed, "all properties hold" if not failed else f"failed: {', '.join(failed)}")
    assert not failed
