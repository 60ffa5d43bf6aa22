"""Calibration pipeline: coupling chevrons, Stage-1 working point, Ramsey phases, CPhase tuning.

All phases use the e^{-i phi} convention: a diagonal propagator element
U_ss = e^{-i phi_s}. Conditional phases are wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize, minimize_scalar

from .dynamics import FlatTopFamily, PulseSchedule, dynamical_phase, flat_top
from .hamiltonian import ControlModel, DeviceSpec, dressed_basis, dressed_qubit_parameters, resonance_shift
from .hilbert import basis_index, qubit_state

DEFAULT_DT = {"effective": 0.01, "full": 0.005}
MIN_CONTRAST = 0.5
# analytic CPhase durations beyond this multiple of the cap are rejected untried
GUESS_MARGIN = 1.25


class CalibrationFailure(RuntimeError):
    """No grid point met the acceptance thresholds; ``diagnostics`` says why."""

    def __init__(self, message: str, diagnostics: Mapping | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TomographyError(RuntimeError):
    """Ramsey contrast too low to extract a phase."""


class TuningError(RuntimeError):
    """CPhase target unreachable under the duration cap."""


def wrap(phi: float | np.ndarray) -> float | np.ndarray:
    """Wrap to (-pi, pi]."""
    out = -((-np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi)
    return float(out) if np.ndim(out) == 0 else out


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map, optionally over worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# --- records -------------------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    """Observable matrix of shape (len(y_values), len(x_values))."""

    x_name: str
    x_values: np.ndarray
    y_name: str
    y_values: np.ndarray
    values: np.ndarray
    observable: str = ""

    def __post_init__(self):
        x = np.asarray(self.x_values, dtype=float)
        y = np.asarray(self.y_values, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(y), len(x)):
            raise ValueError(f"values shape {v.shape} != (|y|, |x|) = {(len(y), len(x))}")
        if not np.all(np.isfinite(v)):
            raise ValueError("scan grid contains non-finite values")
        object.__setattr__(self, "x_values", x)
        object.__setattr__(self, "y_values", y)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class CalibrationPoint:
    """Stage-1 working point.

    ``delta_working`` is the Qubit 2 flux-pulse amplitude (GHz) that tunes
    |101> and |020> into resonance; ``phi_geometric`` is the total conditional
    phase of |101> (geometric part plus the absorbed phi13), calibrated to pi.
    """

    delta_working: float
    tau_stage1: float
    J_est: float
    p_return: float
    phi_geometric: float
    ramp: float = 30.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "CalibrationPoint":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class PhaseSet:
    """Ramsey-extracted phases, all wrapped to (-pi, pi].

    ``phi13`` is the |10+> - |00+> Ramsey value and therefore contains the
    geometric phase of the Stage-1 cycle; ``phi_geometric`` is the
    Aharonov-Anandan geometric part of it (0 when no schedule was given).
    """

    phi12: float
    phi23: float
    phi13: float
    phi123: float
    phi_geometric: float
    singles: tuple[float, float, float]

    def __post_init__(self):
        for name in ("phi12", "phi23", "phi13", "phi123", "phi_geometric"):
            object.__setattr__(self, name, wrap(getattr(self, name)))
        object.__setattr__(self, "singles", tuple(wrap(s) for s in self.singles))

    @property
    def phi111(self) -> float:
        """Conditional phase of |111> composed from the pairwise and three-body parts."""
        return wrap(self.phi12 + self.phi23 + self.phi13 + self.phi123)

    @property
    def phi13_dynamical(self) -> float:
        return wrap(self.phi13 - self.phi_geometric)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["singles"] = list(self.singles)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PhaseSet":
        return cls(d["phi12"], d["phi23"], d["phi13"], d["phi123"], d["phi_geometric"], tuple(d["singles"]))


@dataclass(frozen=True)
class CPhaseTuning:
    """Cancellation pulse on one pair: Qubit 2 detuning (GHz) for ``duration`` ns."""

    pair: tuple[str, str]
    duration: float
    detuning: float
    phase: float = 0.0
    p_return: float = 1.0
    target: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair"] = list(self.pair)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CPhaseTuning":
        return cls(tuple(d["pair"]), float(d["duration"]), float(d["detuning"]),
                   float(d.get("phase", 0.0)), float(d.get("p_return", 1.0)), float(d.get("target", 0.0)))


@dataclass(frozen=True)
class PulseConfig:
    ramp_stage1: float = 30.0
    ramp_cphase: float = 5.0
    dt: float | None = None
    phase_tol: float = 0.05
    min_return: float = 0.95
    cphase_cap: float = 60.0
    cphase_phase_tol: float = 0.02
    cphase_activation: str = "single"

    def __post_init__(self):
        if self.cphase_activation not in ("single", "both"):
            raise ValueError(f"cphase_activation must be 'single' or 'both', got {self.cphase_activation!r}")


# --- simulator -----------------------------------------------------------


class Simulator:
    """A device plus pulse conventions, working in the idle dressed basis.

    Propagators returned by :meth:`to_frame` are expressed in the eigenbasis
    of the idle Hamiltonian, labelled by the bare states they connect to.
    For the switchable effective model this basis is the bare basis.
    """

    def __init__(self, spec: DeviceSpec, pulses: PulseConfig | None = None):
        self.spec = spec
        self.pulses = pulses or PulseConfig()
        self.model = ControlModel(spec)
        self.dt = self.pulses.dt or DEFAULT_DT[spec.flavor]
        self.basis = dressed_basis(self.model.h0)
        self.qubits = spec.qubits
        self.pairs = spec.qubit_pairs()

    def index(self, qubit_occ: Sequence[int]) -> int:
        return basis_index(qubit_state(qubit_occ, self.spec.space), self.spec.space)

    @property
    def computational(self) -> list[int]:
        return [self.index(b) for b in np.ndindex(2, 2, 2)]

    def to_frame(self, u: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ u @ self.basis

    def activation(self, pairs: Iterable[tuple[str, str]]) -> dict[str, float]:
        out = {}
        for a, b in pairs:
            act = self.spec.activation(a, b)
            if act:
                out[act[0]] = act[1]
        return out

    def stage1_amplitudes(self, delta: float) -> dict[str, float]:
        amps = self.activation(self.pairs)
        amps[self.qubits[1]] = delta
        return amps

    def cphase_amplitudes(self, pair: tuple[str, str], detuning: float) -> dict[str, float]:
        amps = self.activation(self.pairs if self.pulses.cphase_activation == "both" else [pair])
        amps[self.qubits[1]] = detuning
        return amps

    def family(self, amplitudes: Mapping[str, float], ramp: float) -> FlatTopFamily:
        return FlatTopFamily(self.model, amplitudes, ramp, self.dt)

    def stage1_family(self, delta: float) -> FlatTopFamily:
        return self.family(self.stage1_amplitudes(delta), self.pulses.ramp_stage1)

    def stage1_schedule(self, point: CalibrationPoint) -> PulseSchedule:
        return flat_top(self.stage1_amplitudes(point.delta_working), point.ramp,
                        point.tau_stage1 - 2 * point.ramp, self.dt)

    def cphase_schedule(self, tuning: CPhaseTuning) -> PulseSchedule:
        r = min(self.pulses.ramp_cphase, tuning.duration / 2)
        return flat_top(self.cphase_amplitudes(tuning.pair, tuning.detuning), r, tuning.duration - 2 * r, self.dt)

    def stage1_unitary(self, point: CalibrationPoint) -> np.ndarray:
        fam = self.family(self.stage1_amplitudes(point.delta_working), point.ramp)
        return self.to_frame(fam(point.tau_stage1))

    def cphase_unitary(self, tuning: CPhaseTuning) -> np.ndarray:
        if tuning.duration <= 0:
            return np.eye(self.model.dim, dtype=complex)
        r = min(self.pulses.ramp_cphase, tuning.duration / 2)
        fam = self.family(self.cphase_amplitudes(tuning.pair, tuning.detuning), r)
        return self.to_frame(fam(tuning.duration))

    def resonance_guess(self) -> tuple[float, float]:
        """Qubit 2 shift of the dressed |101>/|020> anticrossing and |J| there (GHz)."""
        return resonance_shift(self.spec)

    def transition_detuning(self, shift: float) -> float:
        """Bare |101> - |020> detuning (GHz) with Qubit 2 moved by ``shift``."""
        m1, m2, m3 = (self.spec.mode(q) for q in self.qubits)
        return m1.frequency + m3.frequency - 2 * (m2.frequency + shift) - m2.anharmonicity

    # diagonal phases in the e^{-i phi} convention
    def phase(self, u: np.ndarray, occ: Sequence[int]) -> float:
        i = self.index(occ)
        return -float(np.angle(u[i, i]))

    def conditional_101(self, u: np.ndarray) -> float:
        p = self.phase
        return wrap(p(u, (1, 0, 1)) - p(u, (1, 0, 0)) - p(u, (0, 0, 1)) + p(u, (0, 0, 0)))

    def pair_conditional(self, u: np.ndarray, pair: tuple[str, str]) -> tuple[float, float]:
        """Conditional phase and |11> return probability of a qubit pair (spectator in |0>)."""
        ka, kb = (self.qubits.index(q) for q in pair)
        occ = [[0, 0, 0] for _ in range(4)]
        occ[1][ka] = 1
        occ[2][kb] = 1
        occ[3][ka] = occ[3][kb] = 1
        p = [self.phase(u, o) for o in occ]
        i11 = self.index(occ[3])
        return wrap(p[3] - p[1] - p[2] + p[0]), float(abs(u[i11, i11]) ** 2)


# --- chevron ---------------------------------------------------------------


@dataclass(frozen=True)
class ChevronResult:
    grid: ScanGrid
    g_fit: np.ndarray
    zero_candidates: tuple[float, ...]


def _fit_swap_rate(times: np.ndarray, p: np.ndarray, floor: float = 0.02) -> float:
    """g (GHz) of P(t) = A sin^2(2 pi g t), seeded by the FFT peak; 0 without oscillation."""
    if np.ptp(p) < floor:
        return 0.0
    dt = times[1] - times[0]
    spec = np.abs(np.fft.rfft(p - p.mean()))
    freqs = np.fft.rfftfreq(len(p), dt)
    f0 = freqs[1 + int(np.argmax(spec[1:]))]
    model = lambda t, a, g: a * np.sin(2 * np.pi * g * t) ** 2
    try:
        (a, g), _ = curve_fit(model, times, p, p0=(max(p.max(), 0.1), f0 / 2), maxfev=10000)
    except RuntimeError:
        return float(f0 / 2)
    return float(abs(g))


def chevron_coupling_scan(
    sim: Simulator, pair: tuple[str, str], controls: Sequence[float], times: Sequence[float] | None = None
) -> ChevronResult:
    """Resonant single-excitation swap between ``pair`` vs coupling control and time.

    For the effective model a control value scales the designed g~; for the
    full model it is the coupler frequency shift (GHz). The second qubit of
    the pair is moved onto the first one's dressed frequency with a square
    pulse, and the exchanged population is fitted to sin^2(2 pi g~ t).
    """
    a, b = pair
    times = np.linspace(0.0, 100.0, 201) if times is None else np.asarray(times, dtype=float)
    act = sim.spec.activation(a, b)
    target = act[0] if act else None
    ka, kb = sim.qubits.index(a), sim.qubits.index(b)
    start = [0, 0, 0]
    start[ka] = 1
    swapped = [0, 0, 0]
    swapped[kb] = 1
    i0, i1 = sim.index(start), sim.index(swapped)
    cols, fits, zeros = [], [], []
    for c in controls:
        values = {target: c} if target else {}
        freqs, _ = dressed_qubit_parameters(sim.spec, values if sim.spec.flavor == "full" else None)
        amps = dict(values)
        amps[b] = freqs[a] - freqs[b]
        fam = sim.family(amps, 0.0)
        p = np.array([abs(sim.to_frame(fam(t))[i1, i0]) ** 2 for t in times])
        g = _fit_swap_rate(times, p)
        if g == 0.0:
            zeros.append(float(c))
        cols.append(p)
        fits.append(g)
    grid = ScanGrid("control", np.asarray(controls, float), "time_ns", times, np.array(cols).T, "p_swapped")
    return ChevronResult(grid, np.array(fits), tuple(zeros))


# --- Stage-1 working point -------------------------------------------------


def first_revival(p: np.ndarray) -> int | None:
    """Index of the first local maximum that follows a local minimum.

    Traces start from full population at t = 0, so a trace that is already
    rising at its first sample has passed its minimum before the grid.
    """
    seen_min = len(p) > 1 and p[0] < p[1]
    for k in range(1, len(p) - 1):
        if not seen_min and p[k] < p[k - 1] and p[k] <= p[k + 1]:
            seen_min = True
        elif seen_min and p[k] >= p[k - 1] and p[k] > p[k + 1]:
            return k
    return None


@dataclass(frozen=True)
class _Column:
    delta: float
    p_return: np.ndarray
    phase: np.ndarray


def _stage1_column(args) -> _Column:
    sim, delta, times = args
    fam = sim.stage1_family(delta)
    i = sim.index((1, 0, 1))
    ps, phs = [], []
    for t in times:
        u = sim.to_frame(fam(t))
        ps.append(abs(u[i, i]) ** 2)
        phs.append(sim.conditional_101(u))
    return _Column(delta, np.array(ps), np.unwrap(np.array(phs)))


@dataclass(frozen=True)
class WorkingPointScan:
    p_return: ScanGrid
    phase: ScanGrid
    revivals: list[tuple[float, float, float, float]]


def stage1_scan(
    sim: Simulator, deltas: Sequence[float], times: Sequence[float], jobs: int = 1
) -> WorkingPointScan:
    """P(|101>) and conditional phase over Qubit 2 shift x pulse duration."""
    times = np.asarray(times, dtype=float)
    cols = parallel_map(_stage1_column, [(sim, float(d), times) for d in deltas], jobs)
    p = np.array([c.p_return for c in cols]).T
    ph = np.array([c.phase for c in cols]).T
    revivals = []
    for c in cols:
        k = first_revival(c.p_return)
        if k is not None:
            revivals.append((c.delta, float(times[k]), float(c.p_return[k]), float(c.phase[k])))
    return WorkingPointScan(
        ScanGrid("delta_GHz", deltas, "time_ns", times, p, "p_return"),
        ScanGrid("delta_GHz", deltas, "time_ns", times, ph, "conditional_phase"),
        revivals,
    )


def revival_time(sim: Simulator, delta: float, guess: float, width: float) -> tuple[float, float, np.ndarray]:
    """Refine the full-return duration near ``guess``; returns (tau, p_return, U in frame)."""
    fam = sim.stage1_family(delta)
    i = sim.index((1, 0, 1))
    lo = max(2 * sim.pulses.ramp_stage1, guess - width)
    res = minimize_scalar(lambda t: -abs(sim.to_frame(fam(t))[i, i]) ** 2, bounds=(lo, guess + width),
                          method="bounded", options={"xatol": 1e-6})
    u = sim.to_frame(fam(res.x))
    return float(res.x), float(abs(u[i, i]) ** 2), u


def default_times(ramp: float, t_max: float = 250.0, points: int = 120) -> np.ndarray:
    return np.linspace(2 * ramp, t_max, points)


def find_working_point(
    sim: Simulator,
    delta_center: float | None = None,
    span: float = 0.015,
    points: int = 61,
    times: Sequence[float] | None = None,
    jobs: int = 1,
    scan: WorkingPointScan | None = None,
) -> tuple[CalibrationPoint, WorkingPointScan]:
    """Grid search over Qubit 2 shift x duration, then a continuous refinement.

    Grid: per detuning column, the first full-return point is located; the
    conditional phase at these points is bracketed around pi. Refinement
    solves phase = pi on the detuning axis with the return time re-optimized
    at every step. Ties prefer the higher return, then smaller |delta|, then
    the shorter pulse.
    """
    pulses = sim.pulses
    j_guess = None
    if delta_center is None:
        delta_center, j_guess = sim.resonance_guess()
    if times is None:
        times = default_times(pulses.ramp_stage1)
    times = np.asarray(times, dtype=float)
    deltas = delta_center + np.linspace(-span, span, points)
    if scan is None:
        scan = stage1_scan(sim, deltas, times, jobs)
    dips = 1.0 - scan.p_return.values.min(axis=0)
    if dips.max() < 0.5 or not scan.revivals:
        raise CalibrationFailure(
            "no oscillation: |101> never leaves its initial state on the scan grid",
            {"max_depletion": float(dips.max()), "delta_range": [float(deltas[0]), float(deltas[-1])]},
        )
    rev = scan.revivals
    step = times[1] - times[0]
    brackets = []
    for (d0, t0, p0, f0), (d1, t1, p1, f1) in zip(rev, rev[1:]):
        e0, e1 = wrap(f0 - np.pi), wrap(f1 - np.pi)
        if e0 * e1 <= 0 and abs(e0) < np.pi / 2 and abs(e1) < np.pi / 2:
            brackets.append((min(p0, p1), d0, d1, t0, t1))
    if not brackets:
        best = max(rev, key=lambda r: r[2])
        raise CalibrationFailure(
            "no full-return point with a pi conditional phase in the scan window",
            {"best_return": best[2], "best_delta": best[0], "best_phase": best[3]},
        )
    brackets.sort(key=lambda b: (-b[0], abs(0.5 * (b[1] + b[2])), 0.5 * (b[3] + b[4])))
    _, d0, d1, t0, t1 = brackets[0]
    width = 3 * step + abs(t1 - t0)

    def tau_at(d):
        frac = 0.0 if d1 == d0 else (d - d0) / (d1 - d0)
        return revival_time(sim, d, t0 + frac * (t1 - t0), width)

    def err(d):
        return wrap(sim.conditional_101(tau_at(d)[2]) - np.pi)

    try:
        d_star = brentq(err, d0, d1, xtol=1e-10)
    except ValueError:
        d_star = min((d0, d1), key=lambda d: abs(err(d)))
    tau, p, u = tau_at(d_star)
    phi = sim.conditional_101(u)
    if phi <= 0:
        phi += 2 * np.pi
    diag = {"delta": d_star, "tau": tau, "p_return": p, "phase": phi}
    if p < pulses.min_return or abs(phi - np.pi) > pulses.phase_tol:
        raise CalibrationFailure("refined point misses the return or phase threshold", diag)
    if j_guess is None:
        j_guess = resonance_shift(sim.spec)[1]
    point = CalibrationPoint(d_star, tau, j_guess, p, phi, pulses.ramp_stage1)
    return point, scan


# --- Ramsey tomography --------------------------------------------------------

RAMSEY_STATES = {
    # label: (fixed occupations, superposed qubit index)
    "0+0": ((0, None, 0), 1),
    "1+1": ((1, None, 1), 1),
    "1+0": ((1, None, 0), 1),
    "0+1": ((0, None, 1), 1),
    "10+": ((1, 0, None), 2),
    "00+": ((0, 0, None), 2),
    "+00": ((None, 0, 0), 0),
}


def ramsey_phase(sim: Simulator, u: np.ndarray, label: str) -> float:
    """Phase (e^{-i phi}) picked up by |1> relative to |0> of the superposed qubit."""
    fixed, k = RAMSEY_STATES[label]
    lo = list(fixed)
    hi = list(fixed)
    lo[k], hi[k] = 0, 1
    i0, i1 = sim.index(lo), sim.index(hi)
    psi = (u[:, i0] + u[:, i1]) / math.sqrt(2)
    c0, c1 = psi[i0], psi[i1]
    contrast = 2 * abs(c0) * abs(c1)
    if contrast < MIN_CONTRAST:
        raise TomographyError(f"Ramsey contrast {contrast:.3f} < {MIN_CONTRAST} for |{label}>")
    return -float(np.angle(c1 / c0))


def measure_conditional_phases(
    sim: Simulator, u: np.ndarray, schedule: PulseSchedule | None = None
) -> PhaseSet:
    """Six-state Ramsey extraction (plus a |+00> reference for Qubit 1's single phase).

    ``u`` is a propagator in the simulator frame. When the generating
    ``schedule`` is given, phi13 is split into its dynamical part
    (integral of <H> along the |101> path minus the single-excitation
    references) and the geometric remainder.
    """
    r = {label: ramsey_phase(sim, u, label) for label in RAMSEY_STATES}
    phi12 = r["1+0"] - r["0+0"]
    phi23 = r["0+1"] - r["0+0"]
    phi13 = r["10+"] - r["00+"]
    phi123 = wrap(r["1+1"] - r["0+0"]) - wrap(phi12) - wrap(phi23)
    singles = (r["+00"], r["0+0"], r["00+"])
    geometric = 0.0
    if schedule is not None:
        labels = ((0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1))
        psi0 = sim.basis[:, [sim.index(s) for s in labels]]
        d = dynamical_phase(sim.model, schedule, psi0)
        geometric = wrap(phi13) - wrap(d[3] - d[1] - d[2] + d[0])
    return PhaseSet(phi12, phi23, phi13, phi123, geometric, singles)


def stage1_phases(sim: Simulator, point: CalibrationPoint) -> PhaseSet:
    return measure_conditional_phases(sim, sim.stage1_unitary(point), sim.stage1_schedule(point))


# --- CPhase cancellation ----------------------------------------------------


def cphase_guess(sim: Simulator, pair: tuple[str, str], target: float) -> list[tuple[float, float]]:
    """Analytic (detuning, duration) starts from the two-level |11>/|02> model.

    A full cycle at exchange rate G = sqrt(2) g~ and detuning D picks up
    pi (1 - D/Omega), Omega = sqrt(D^2 + 4 G^2); both signs of D are returned.
    """
    other = pair[0] if pair[1] == sim.qubits[1] else pair[1]
    if sim.qubits[1] not in pair:
        raise ValueError("cancellation pulses act on pairs that include Qubit 2")
    eff = sim.spec
    if eff.flavor == "full":
        act = sim.activation([pair])
        freqs, anh = dressed_qubit_parameters(eff, act)
        g = abs(_full_pair_coupling(eff, pair))
    else:
        freqs = {q: eff.mode(q).frequency for q in eff.qubits}
        anh = {q: eff.mode(q).anharmonicity for q in eff.qubits}
        g = abs(eff.coupling(*pair))
    q2 = sim.qubits[1]
    d0 = freqs[other] - anh[q2] - freqs[q2]
    phi = target % (2 * np.pi)
    x = 1.0 - phi / np.pi
    G = math.sqrt(2) * g
    D = x * 2 * G / math.sqrt(max(1e-9, 1 - x * x))
    omega = math.hypot(D, 2 * G)
    tau = 1.0 / omega + sim.pulses.ramp_cphase
    return [(d0 - D, tau), (d0 + D, tau)]


def _full_pair_coupling(full: DeviceSpec, pair) -> float:
    from .hamiltonian import effective_from_full

    return effective_from_full(full, activated=True).coupling(*pair)


def tune_cphase_cancellation(sim: Simulator, pair: tuple[str, str], target_phase: float) -> CPhaseTuning:
    """Find a |11> <-> |02> cycle on ``pair`` with conditional phase ``target_phase``.

    Nelder-Mead over (detuning, duration) from the analytic starts, minimizing
    the return error plus a phase penalty.
    """
    pulses = sim.pulses
    target = wrap(target_phase)
    if abs(target) < pulses.cphase_phase_tol:
        return CPhaseTuning(tuple(pair), 0.0, 0.0, 0.0, 1.0, target)
    r = pulses.ramp_cphase
    starts = cphase_guess(sim, pair, target)
    shortest = min(dur for _, dur in starts)
    if shortest > GUESS_MARGIN * pulses.cphase_cap:
        # the two-level estimate is good to a few percent; skip a hopeless search
        raise TuningError(
            f"pair {pair}: a {target:+.3f} rad cycle needs about {shortest:.1f} ns (cap {pulses.cphase_cap} ns)"
        )

    def evaluate(x):
        det, dur = x
        if dur < 2 * r:
            return None
        fam = sim.family(sim.cphase_amplitudes(pair, det), r)
        return sim.pair_conditional(sim.to_frame(fam(dur)), pair)

    def cost(x):
        out = evaluate(x)
        if out is None:
            return 10.0 + (2 * r - x[1])
        phase, p = out
        return (1 - p) + 0.1 * wrap(phase - target) ** 2

    best = None
    for det0, dur0 in starts:
        res = minimize(cost, [det0, dur0], method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-13, "initial_simplex": [
                           [det0, dur0], [det0 + 0.004, dur0], [det0, dur0 + 1.0]]})
        if best is None or res.fun < best.fun:
            best = res
    det, dur = (float(v) for v in best.x)
    phase, p = evaluate(best.x)
    if dur > pulses.cphase_cap or abs(wrap(phase - target)) > pulses.cphase_phase_tol:
        raise TuningError(
            f"pair {pair}: best cycle {dur:.2f} ns, phase error {wrap(phase - target):+.3f} rad "
            f"(cap {pulses.cphase_cap} ns, tol {pulses.cphase_phase_tol} rad)"
        )
    return CPhaseTuning(tuple(pair), dur, det, phase, p, target)
