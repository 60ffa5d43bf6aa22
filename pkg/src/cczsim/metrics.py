"""Gate fidelity, leakage and robustness scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .calibration import Simulator, parallel_map
from .hilbert import Space, basis_index, basis_state, qubit_state

DIP_FRACTION = 0.03


def average_gate_fidelity(u_ideal: np.ndarray, u_real: np.ndarray) -> float:
    """(|Tr(U_ideal^dag U_real)|^2 + Tr(U_real^dag U_real)) / (d (d + 1)).

    ``u_real`` may be sub-unitary (leakage out of the block).
    """
    u_ideal = np.asarray(u_ideal)
    u_real = np.asarray(u_real)
    if u_ideal.shape != u_real.shape or u_ideal.ndim != 2 or u_ideal.shape[0] != u_ideal.shape[1]:
        raise ValueError(f"dimension mismatch: {u_ideal.shape} vs {u_real.shape}")
    d = u_ideal.shape[0]
    overlap = abs(np.trace(u_ideal.conj().T @ u_real)) ** 2
    norm = np.trace(u_real.conj().T @ u_real).real
    return float((overlap + norm) / (d * (d + 1)))


def ccz_target(flip: Sequence[int] = (1, 0, 1), phase: float = np.pi) -> np.ndarray:
    """Diagonal three-qubit target with e^{-i phase} on the basis state ``flip``."""
    u = np.eye(8, dtype=complex)
    k = int("".join(str(b) for b in flip), 2)
    u[k, k] = np.exp(-1j * phase)
    return u


@dataclass(frozen=True)
class LeakageReport:
    per_state: dict[str, float]
    total: float
    second_excited: float
    second_excited_states: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_state": dict(self.per_state),
            "total": self.total,
            "second_excited": self.second_excited,
            "second_excited_states": dict(self.second_excited_states),
        }


def _label(occ: Sequence[int]) -> str:
    return "".join(str(n) for n in occ)


def leakage(
    final: np.ndarray,
    space: Space,
    targets: Sequence[Sequence[int]] = ((0, 1, 1), (1, 1, 0)),
) -> LeakageReport:
    """L_s = <s|rho|s> for a final state vector or density matrix.

    Targets are qubit labels with couplers in their ground state. States with
    any qubit in |2> are summed separately as second-excited leakage.
    """
    final = np.asarray(final)
    probs = np.abs(final) ** 2 if final.ndim == 1 else np.real(np.diag(final))
    per = {_label(s): float(probs[basis_index(qubit_state(s, space), space)]) for s in targets}
    qpos = [k for k, m in enumerate(space) if m.kind == "qubit"]
    second = {}
    for i in np.flatnonzero(probs > 0):
        occ = basis_state(int(i), space)
        if any(occ[k] == 2 for k in qpos):
            second[_label(occ)] = float(probs[i])
    return LeakageReport(per, float(sum(per.values())), float(sum(second.values())), second)


def leakage_from_unitary(
    u: np.ndarray,
    space: Space,
    initial: Sequence[int] = (1, 0, 1),
    targets: Sequence[Sequence[int]] = ((0, 1, 1), (1, 1, 0)),
) -> LeakageReport:
    """Leakage of the column of ``u`` for the computational input ``initial``."""
    return leakage(np.asarray(u)[:, basis_index(qubit_state(initial, space), space)], space, targets)


# --- robustness --------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessGrid:
    """Fidelity over coupling drift delta (columns) and detuning drift zeta in MHz (rows)."""

    delta_values: np.ndarray
    zeta_values: np.ndarray
    fidelity: np.ndarray
    crossings: tuple = ()

    def __post_init__(self):
        f = np.asarray(self.fidelity, dtype=float)
        d = np.asarray(self.delta_values, dtype=float)
        z = np.asarray(self.zeta_values, dtype=float)
        if f.shape != (len(z), len(d)):
            raise ValueError(f"fidelity shape {f.shape} != (|zeta|, |delta|) = {(len(z), len(d))}")
        if np.any(f < -1e-12) or np.any(f > 1 + 1e-9):
            raise ValueError("fidelities must lie in [0, 1]")
        object.__setattr__(self, "fidelity", f)
        object.__setattr__(self, "delta_values", d)
        object.__setattr__(self, "zeta_values", z)

    @property
    def minimum(self) -> float:
        return float(self.fidelity.min())

    @property
    def argmin(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmin(self.fidelity)), self.fidelity.shape)
        return float(self.delta_values[j]), float(self.zeta_values[i])

    @property
    def nominal(self) -> float | None:
        i = np.flatnonzero(np.isclose(self.zeta_values, 0.0))
        j = np.flatnonzero(np.isclose(self.delta_values, 0.0))
        if len(i) and len(j):
            return float(self.fidelity[i[0], j[0]])
        return None

    def dips(self, fraction: float = DIP_FRACTION) -> list[tuple[float, float, float]]:
        """Points more than ``fraction`` below the mean of their 4-neighbours."""
        f = self.fidelity
        out = []
        for i in range(f.shape[0]):
            for j in range(f.shape[1]):
                nb = [f[a, b] for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))
                      if 0 <= a < f.shape[0] and 0 <= b < f.shape[1]]
                mean = float(np.mean(nb))
                if f[i, j] < mean * (1 - fraction):
                    out.append((float(self.delta_values[j]), float(self.zeta_values[i]), float(f[i, j])))
        return out

    def summary(self) -> dict:
        d, z = self.argmin
        return {
            "min": self.minimum,
            "argmin": {"delta": d, "zeta_mhz": z},
            "nominal": self.nominal,
            "dips": [{"delta": a, "zeta_mhz": b, "fidelity": c} for a, b, c in self.dips()],
            "level_crossing_candidates": list(self.crossings),
        }


def level_crossings(h: np.ndarray, space: Space, window: float, max_excitations: int = 3) -> list[dict]:
    """Pairs of bare-labelled levels closer than ``window`` (same units as ``h``).

    Only pairs that share the excitation number and include a computational
    state are reported; these are the candidate resonances behind isolated
    fidelity dips.
    """
    diag = np.real(np.diag(h))
    qpos = [k for k, m in enumerate(space) if m.kind == "qubit"]
    states = [basis_state(i, space) for i in range(len(diag))]
    out = []
    for i, si in enumerate(states):
        if any(si[k] > 1 for k in qpos) or any(si[k] for k in range(len(space)) if k not in qpos):
            continue
        ni = sum(si)
        if ni == 0 or ni > max_excitations:
            continue
        for j, sj in enumerate(states):
            if j == i or sum(sj) != ni:
                continue
            gap = abs(diag[i] - diag[j])
            if gap < window:
                out.append({"state": _label(si), "partner": _label(sj), "gap": float(gap)})
    return out


def _robustness_point(args):
    from .gates import assemble_ccz

    spec, pulses, recipe, delta, zeta_mhz = args
    sim = Simulator(spec.scaled_couplings(1.0 + delta), pulses)
    # zeta moves the |101>-|020> detuning, which changes by -2x the Qubit 2 shift
    shifted = recipe.with_stage1(delta_working=recipe.stage1.delta_working - 0.5e-3 * zeta_mhz)
    return assemble_ccz(sim, shifted).fidelity


def robustness_scan(
    sim,
    recipe,
    delta_range: tuple[float, float] = (-0.05, 0.05),
    zeta_range: tuple[float, float] = (-1.0, 1.0),
    grid: tuple[int, int] = (11, 11),
    jobs: int = 1,
) -> RobustnessGrid:
    """Fixed-recipe fidelity under g -> (1 + delta) g and a Stage-1 detuning drift zeta (MHz).

    Every coupling of the device is rescaled. Isolated dips are annotated with
    near-degenerate levels of the drifted Stage-1 plateau Hamiltonian.
    """
    deltas = np.linspace(*delta_range, grid[0])
    zetas = np.linspace(*zeta_range, grid[1])
    args = [(sim.spec, sim.pulses, recipe, float(d), float(z)) for z in zetas for d in deltas]
    fid = np.array(parallel_map(_robustness_point, args, jobs)).reshape(len(zetas), len(deltas))
    out = RobustnessGrid(deltas, zetas, np.clip(fid, 0.0, 1.0))
    crossings = []
    for d, z, _ in out.dips():
        drift = Simulator(sim.spec.scaled_couplings(1.0 + d), sim.pulses)
        h = drift.model.hamiltonian(drift.stage1_amplitudes(recipe.stage1.delta_working - 0.5e-3 * z))
        window = 2 * np.pi * 2 * max(abs(g) for g in sim.spec.couplings.values())
        for c in level_crossings(h, sim.spec.space, window):
            crossings.append({"delta": d, "zeta_mhz": z, **c})
    return RobustnessGrid(deltas, zetas, out.fidelity, tuple(crossings))


# --- leakage map -------------------------------------------------------------


@dataclass(frozen=True)
class LeakageMap:
    """Stage-1 leakage from |101> over Qubit 2 shift (columns) and duration (rows)."""

    deltas: np.ndarray
    times: np.ndarray
    l011: np.ndarray
    l110: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.l011 + self.l110

    def optimum(self) -> tuple[float, float, float]:
        """(delta, time, total) at the smallest total leakage."""
        i, j = np.unravel_index(int(np.argmin(self.total)), self.total.shape)
        return float(self.deltas[j]), float(self.times[i]), float(self.total[i, j])


def _leakage_column(args):
    sim, delta, times = args
    fam = sim.stage1_family(delta)
    i0 = sim.index((1, 0, 1))
    a, b = sim.index((0, 1, 1)), sim.index((1, 1, 0))
    l011, l110 = [], []
    for t in times:
        col = sim.to_frame(fam(t))[:, i0]
        l011.append(abs(col[a]) ** 2)
        l110.append(abs(col[b]) ** 2)
    return np.array(l011), np.array(l110)


def leakage_scan(sim: Simulator, deltas: Sequence[float], times: Sequence[float], jobs: int = 1) -> LeakageMap:
    deltas = np.asarray(deltas, dtype=float)
    times = np.asarray(times, dtype=float)
    cols = parallel_map(_leakage_column, [(sim, float(d), times) for d in deltas], jobs)
    return LeakageMap(deltas, times, np.array([c[0] for c in cols]).T, np.array([c[1] for c in cols]).T)
