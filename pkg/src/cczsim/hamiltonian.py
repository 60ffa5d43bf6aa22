"""Circuit Hamiltonians for the three-transmon / two-coupler device.

Two flavors share one :class:`DeviceSpec`:

* ``full``: five Duffing modes (Q1, C1, Q2, C2, Q3) with charge-type
  couplings ``g (a_i - a_i^dag)(a_j - a_j^dag)``, counter-rotating terms kept.
  Couplers idle at their zero-coupling frequency and are switched on by a
  frequency shift to ``coupler_on``.
* ``effective``: three transmons with exchange couplings ``g~ (a_i^dag a_j + h.c.)``
  left after eliminating the couplers. When ``switchable`` is set the
  couplings are gated by per-pair activation controls (0 = off, 1 = on).

All matrices returned here are in rad/ns. Every number crossing the module
boundary (spec fields, offsets, returned couplings) is in GHz.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .hilbert import (
    TWO_PI,
    DimensionError,
    ModeSpec,
    basis_index,
    check_hermitian,
    dimension,
    embed,
    ladder,
    mode_position,
    qubit_state,
    _single_mode,
)

log = logging.getLogger(__name__)

DISPERSIVE_LIMIT = 0.25
DISPERSIVE_WARN = 0.1


class SingularityError(ArithmeticError):
    """A perturbative denominator vanished."""


class DispersiveError(ValueError):
    """Coupling too strong for the perturbative treatment."""


class DegeneracyError(RuntimeError):
    """Dressed states cannot be assigned to bare labels unambiguously."""


def pair_key(a: str, b: str) -> str:
    return f"{a}-{b}"


@dataclass(frozen=True)
class DeviceSpec:
    modes: tuple[ModeSpec, ...]
    couplings: Mapping[tuple[str, str], float]
    flavor: str = "effective"
    switchable: bool = True
    coupler_on: Mapping[str, float] = field(default_factory=dict)
    synthetic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", {tuple(k): float(v) for k, v in dict(self.couplings).items()})
        object.__setattr__(self, "coupler_on", dict(self.coupler_on))
        if self.flavor not in ("full", "effective"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate mode labels")
        for a, b in self.couplings:
            if a not in labels or b not in labels:
                raise ValueError(f"coupling ({a}, {b}) references unknown mode")

    @property
    def space(self) -> tuple[ModeSpec, ...]:
        return self.modes

    @property
    def qubits(self) -> list[str]:
        return [m.label for m in self.modes if m.kind == "qubit"]

    @property
    def couplers(self) -> list[str]:
        return [m.label for m in self.modes if m.kind == "coupler"]

    def mode(self, label: str) -> ModeSpec:
        return self.modes[mode_position(self.modes, label)]

    def coupling(self, a: str, b: str) -> float:
        return self.couplings.get((a, b), self.couplings.get((b, a), 0.0))

    def qubit_pairs(self) -> list[tuple[str, str]]:
        """Nearest-neighbour qubit pairs that can be activated."""
        q = self.qubits
        return [(q[k], q[k + 1]) for k in range(len(q) - 1)]

    def coupler_between(self, a: str, b: str) -> str:
        for c in self.couplers:
            if self.coupling(a, c) and self.coupling(b, c):
                return c
        raise KeyError(f"no coupler joins {a} and {b}")

    def activation(self, a: str, b: str) -> tuple[str, float] | None:
        """Control target and amplitude that switch the (a, b) coupling on.

        ``None`` for an always-on effective coupling.
        """
        if self.flavor == "effective":
            return (pair_key(a, b), 1.0) if self.switchable else None
        c = self.coupler_between(a, b)
        return c, self.coupler_on[c] - self.mode(c).frequency

    def with_modes(self, **changes: Mapping[str, float]) -> "DeviceSpec":
        """Copy with per-mode field overrides, e.g. ``with_modes(Q2={"frequency": 5.1})``."""
        modes = tuple(replace(m, **changes.get(m.label, {})) for m in self.modes)
        return replace(self, modes=modes)

    def scaled_couplings(self, factor: float) -> "DeviceSpec":
        return replace(self, couplings={k: v * factor for k, v in self.couplings.items()})

    def to_dict(self) -> dict:
        return {
            "flavor": self.flavor,
            "switchable": self.switchable,
            "synthetic": self.synthetic,
            "modes": [
                {"label": m.label, "frequency": m.frequency, "anharmonicity": m.anharmonicity,
                 "levels": m.levels, "kind": m.kind}
                for m in self.modes
            ],
            "couplings": [{"pair": list(k), "g": v} for k, v in self.couplings.items()],
            "coupler_on": dict(self.coupler_on),
        }

    def validate(self, leakage_analysis: bool = True) -> list[str]:
        """Raise on hard violations, return soft warnings."""
        warnings = []
        for k, m in enumerate(self.modes):
            if m.kind == "qubit" and m.anharmonicity >= 0:
                raise ValueError(f"{m.label}: transmon anharmonicity must be negative, got {m.anharmonicity}")
            if m.kind == "qubit" and leakage_analysis and m.levels < 3:
                raise ValueError(f"{m.label}: needs >= 3 levels for the |2> state")
        if self.flavor == "effective":
            q = self.qubits
            if len(q) != 3:
                raise ValueError(f"effective device needs 3 qubits, got {q}")
            for a, b in self.couplings:
                if self.mode(a).kind != "qubit" or self.mode(b).kind != "qubit":
                    raise ValueError("effective couplings must join qubits")
            for a, b in self.qubit_pairs():
                if (a, b) not in self.couplings and (b, a) not in self.couplings:
                    raise ValueError(f"missing effective coupling {a}-{b}")
        else:
            if len(self.qubits) != 3 or len(self.couplers) != 2:
                raise ValueError("full device needs 3 qubits and 2 couplers")
            for c in self.couplers:
                if c not in self.coupler_on:
                    raise ValueError(f"coupler {c} has no activation frequency")
        for (a, b), g in self.couplings.items():
            if g == 0.0:
                continue
            det = abs(self.mode(a).frequency - self.mode(b).frequency)
            ratio = math.inf if det == 0 else abs(g) / det
            if ratio >= DISPERSIVE_LIMIT:
                raise DispersiveError(f"|g/detuning| = {ratio:.3f} for {a}-{b} exceeds {DISPERSIVE_LIMIT}")
            if ratio > DISPERSIVE_WARN:
                warnings.append(f"{a}-{b}: |g/detuning| = {ratio:.3f} above {DISPERSIVE_WARN}")
        return warnings


@dataclass(frozen=True)
class ZZCoefficients:
    """Static ZZ / ZZZ shifts in MHz."""

    zeta12: float
    zeta23: float
    zeta13: float
    zeta123: float

    def as_dict(self) -> dict:
        return {"zeta12": self.zeta12, "zeta23": self.zeta23, "zeta13": self.zeta13, "zeta123": self.zeta123}


def _offsets(spec: DeviceSpec, offsets: Mapping[str, float] | None) -> dict[str, float]:
    offsets = dict(offsets or {})
    labels = {m.label for m in spec.modes}
    unknown = set(offsets) - labels
    if unknown:
        raise KeyError(f"unknown mode(s) in frequency offsets: {sorted(unknown)}")
    return offsets


def _anharmonic_part(spec: DeviceSpec, offsets: Mapping[str, float]) -> np.ndarray:
    space = spec.space
    h = np.zeros((dimension(space),) * 2, dtype=complex)
    for k, m in enumerate(space):
        n = np.arange(m.levels, dtype=float)
        local = np.diag((m.frequency + offsets.get(m.label, 0.0)) * n + 0.5 * m.anharmonicity * n * (n - 1))
        h += embed(local, k, space)
    return TWO_PI * h


def charge_coupling(a: str, b: str, space) -> np.ndarray:
    """``(a_i - a_i^dag)(a_j - a_j^dag)``; hermitian up to the overall sign convention."""
    xa = ladder(a, "lower", space) - ladder(a, "raise", space)
    xb = ladder(b, "lower", space) - ladder(b, "raise", space)
    return xa @ xb


def exchange_coupling(a: str, b: str, space) -> np.ndarray:
    ad = ladder(a, "raise", space)
    bd = ladder(b, "raise", space)
    return ad @ bd.conj().T + ad.conj().T @ bd


def build_full(spec: DeviceSpec, frequency_offsets: Mapping[str, float] | None = None) -> np.ndarray:
    """Five-mode lab-frame Hamiltonian (rad/ns)."""
    if spec.flavor != "full":
        raise ValueError("build_full needs a full-flavor DeviceSpec")
    offsets = _offsets(spec, frequency_offsets)
    h = _anharmonic_part(spec, offsets)
    for (a, b), g in spec.couplings.items():
        if g:
            h = h + TWO_PI * g * charge_coupling(a, b, spec.space)
    return check_hermitian(h)


def build_effective(
    spec: DeviceSpec,
    frequency_offsets: Mapping[str, float] | None = None,
    activation: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Three-transmon exchange Hamiltonian (rad/ns).

    ``activation`` maps ``"Q1-Q2"`` style keys to a coupling scale; when the
    device is switchable, missing keys default to fully on (1.0).
    """
    if spec.flavor != "effective":
        raise ValueError("build_effective needs an effective-flavor DeviceSpec")
    offsets = _offsets(spec, frequency_offsets)
    activation = dict(activation or {})
    h = _anharmonic_part(spec, offsets)
    for (a, b), g in spec.couplings.items():
        scale = activation.get(pair_key(a, b), activation.get(pair_key(b, a), 1.0)) if spec.switchable else 1.0
        if g and scale:
            h = h + TWO_PI * g * scale * exchange_coupling(a, b, spec.space)
    return check_hermitian(h)


def build(spec: DeviceSpec, frequency_offsets=None, activation=None) -> np.ndarray:
    if spec.flavor == "full":
        return build_full(spec, frequency_offsets)
    return build_effective(spec, frequency_offsets, activation)


class ControlModel:
    """H(u) = h0 + sum_k u_k * controls[k], affine in every pulse control.

    Mode targets take a frequency shift in GHz; ``"Qa-Qb"`` targets (effective,
    switchable devices) take a dimensionless coupling activation. The
    effective model is expressed in a frame rotating at ``frame`` GHz per
    excitation, which commutes with the number-conserving Hamiltonian and only
    adds single-qubit phases.
    """

    def __init__(self, spec: DeviceSpec, frame: float | None = None):
        self.spec = spec
        space = spec.space
        if frame is None:
            frame = float(np.mean([spec.mode(q).frequency for q in spec.qubits])) if spec.flavor == "effective" else 0.0
        if spec.flavor == "full" and frame != 0.0:
            raise ValueError("the full model has counter-rotating terms; only the lab frame is supported")
        self.frame = frame
        self.controls: dict[str, np.ndarray] = {}
        for k, m in enumerate(space):
            self.controls[m.label] = TWO_PI * embed(_single_mode("number", m.levels), k, space)
        if spec.flavor == "effective" and spec.switchable:
            off = {pair_key(a, b): 0.0 for a, b in spec.couplings}
            self.h0 = build_effective(spec, activation=off)
            for (a, b), g in spec.couplings.items():
                self.controls[pair_key(a, b)] = TWO_PI * g * exchange_coupling(a, b, space)
        else:
            self.h0 = build(spec)
        if frame:
            total_n = sum(self.controls[m.label] for m in space)
            self.h0 = self.h0 - frame * total_n
        self.dim = self.h0.shape[0]

    def hamiltonian(self, values: Mapping[str, float] | None = None) -> np.ndarray:
        h = self.h0.copy()
        for target, u in (values or {}).items():
            if u:
                try:
                    h += u * self.controls[target]
                except KeyError:
                    raise KeyError(f"unknown control target {target!r}; have {sorted(self.controls)}") from None
        return h

    def spectral_radius(self, values: Mapping[str, float] | None = None) -> float:
        """Largest |eigenvalue| in GHz, used for step-size checks."""
        h = self.hamiltonian(values)
        return float(np.max(np.abs(np.linalg.eigvalsh(h)))) / TWO_PI


def effective_coupling(
    g_qc1: float, g_qc2: float, g_qq: float, omega_1: float, omega_2: float, omega_c: float
) -> float:
    """Second-order coupler-mediated exchange between two qubits, GHz.

    g~ = g_qq + (g1 g2 / 2)(1/D1 + 1/D2 - 1/S1 - 1/S2), with D_k = w_k - w_c and
    S_k = w_k + w_c. A coupler above both qubits gives a negative mediated term.
    ``g_qq`` is the direct exchange amplitude; with the charge-form coupling of
    :func:`build_full` that is minus the stored qubit-qubit coefficient (the
    mediated term is unaffected because both legs flip sign).
    """
    deltas = (omega_1 - omega_c, omega_2 - omega_c)
    sums = (omega_1 + omega_c, omega_2 + omega_c)
    if any(d == 0.0 for d in deltas + sums):
        raise SingularityError("qubit-coupler detuning is zero")
    for g, d in zip((g_qc1, g_qc2), deltas):
        if abs(g / d) >= DISPERSIVE_LIMIT:
            raise DispersiveError(f"|g/detuning| = {abs(g / d):.3f} outside the dispersive regime")
    mediated = 0.5 * g_qc1 * g_qc2 * (1 / deltas[0] + 1 / deltas[1] - 1 / sums[0] - 1 / sums[1])
    return g_qq + mediated


def zero_coupling_frequency(g_qc1, g_qc2, g_qq, omega_1, omega_2, lo, hi) -> float:
    """Coupler frequency in [lo, hi] where direct and mediated couplings cancel."""
    f = lambda wc: effective_coupling(g_qc1, g_qc2, g_qq, omega_1, omega_2, wc)
    if f(lo) * f(hi) > 0:
        raise ValueError("no zero-coupling point in the bracket")
    return brentq(f, lo, hi, xtol=1e-12)


def two_photon_J(spec: DeviceSpec, working_offsets: Mapping[str, float] | None = None) -> float:
    """Second-order |101> <-> |020> coupling (GHz) from the effective parameters.

    Legs that climb Qubit 2 from |1> to |2> carry the sqrt(2) ladder factor.
    """
    if spec.flavor != "effective":
        raise ValueError("two_photon_J uses effective-model parameters")
    offsets = _offsets(spec, working_offsets)
    q1, q2, q3 = spec.qubits
    w1, w2, w3 = (spec.mode(q).frequency + offsets.get(q, 0.0) for q in (q1, q2, q3))
    w2p = w2 + spec.mode(q2).anharmonicity
    g12, g23 = spec.coupling(q1, q2), spec.coupling(q2, q3)
    k12, k32 = g12, g23
    k12p, k32p = math.sqrt(2) * g12, math.sqrt(2) * g23
    if w2p == w1 or w2p == w3:
        raise SingularityError("omega_2' coincides with omega_1 or omega_3")
    return k32 * k12p / (w2p - w1) + k12 * k32p / (w2p - w3)


def lowdin_block(h: np.ndarray, kept: Sequence[int], energy: float | None = None) -> np.ndarray:
    """Fold the complement of ``kept`` into an effective block at ``energy``.

    H_P = H_PP + H_PQ (E - H_QQ)^-1 H_QP, E defaulting to the mean of diag(H_PP).
    """
    kept = list(kept)
    rest = [i for i in range(h.shape[0]) if i not in set(kept)]
    hpp = h[np.ix_(kept, kept)]
    if energy is None:
        energy = float(np.mean(np.real(np.diag(hpp))))
    hpq = h[np.ix_(kept, rest)]
    hqq = h[np.ix_(rest, rest)]
    resolvent = np.linalg.solve(energy * np.eye(len(rest)) - hqq, hpq.conj().T)
    block = hpp + hpq @ resolvent
    return 0.5 * (block + block.conj().T)


def exact_block(h: np.ndarray, kept: Sequence[int]) -> np.ndarray:
    """Effective hermitian block that reproduces the exact eigenvalues of ``h``.

    The eigenvectors with the largest weight on ``kept`` are projected onto it
    and symmetrically orthonormalised (des Cloizeaux); the block is then
    S diag(E) S^dagger in that basis.
    """
    kept = list(kept)
    evals, evecs = np.linalg.eigh(h)
    weight = np.sum(np.abs(evecs[kept, :]) ** 2, axis=0)
    cols = np.sort(np.argsort(weight)[-len(kept):])
    proj = evecs[np.ix_(kept, cols)]
    w, v = np.linalg.eigh(proj.conj().T @ proj)
    s = proj @ (v * w ** -0.5) @ v.conj().T
    block = (s * evals[cols]) @ s.conj().T
    return 0.5 * (block + block.conj().T)


def project_101_020(h: np.ndarray, space, exact: bool = False) -> np.ndarray:
    """2x2 two-photon model on {|101>, |020>} (same units as ``h``).

    The two states have no direct matrix element in the exchange Hamiltonian;
    the off-diagonal comes from folding every other level into the block,
    which also carries the dispersive shifts onto the diagonal. The default
    is second-order folding; ``exact`` returns the block with the exact pair
    of eigenvalues instead.
    """
    kept = [basis_index(qubit_state(s, space), space) for s in ((1, 0, 1), (0, 2, 0))]
    return exact_block(h, kept) if exact else lowdin_block(h, kept)


def dressed_energies(h: np.ndarray, space, labels: Sequence[Sequence[int]], min_overlap: float = 0.5) -> dict:
    """Eigenvalues assigned to bare qubit labels by maximal overlap."""
    evals, evecs = np.linalg.eigh(h)
    out = {}
    for lab in labels:
        i = basis_index(qubit_state(lab, space), space)
        weights = np.abs(evecs[i, :]) ** 2
        j = int(np.argmax(weights))
        if weights[j] < min_overlap:
            raise DegeneracyError(f"state {tuple(lab)} has max dressed overlap {weights[j]:.3f} < {min_overlap}")
        out[tuple(lab)] = float(evals[j])
    return out


def dressed_basis(h: np.ndarray, min_overlap: float = 0.5) -> np.ndarray:
    """Eigenvectors of ``h`` as columns ordered like the bare basis.

    Column i is the eigenstate adiabatically connected to bare state i
    (maximum-weight assignment), phased so its bare component is real
    positive. For a diagonal ``h`` this is the identity.
    """
    from scipy.optimize import linear_sum_assignment

    if np.count_nonzero(h - np.diag(np.diag(h))) == 0:
        return np.eye(h.shape[0], dtype=complex)
    _, evecs = np.linalg.eigh(h)
    weights = np.abs(evecs) ** 2
    rows, cols = linear_sum_assignment(-weights)
    basis = np.empty_like(evecs)
    for i, j in zip(rows, cols):
        if weights[i, j] < min_overlap:
            raise DegeneracyError(f"bare state {i} has max dressed overlap {weights[i, j]:.3f} < {min_overlap}")
        v = evecs[:, j]
        basis[:, i] = v * (abs(v[i]) / v[i])
    return basis


def zz_coefficients(h: np.ndarray, space) -> ZZCoefficients:
    """ZZ and three-body ZZZ shifts (MHz) from exact diagonalization of ``h`` (rad/ns)."""
    labels = [tuple(int(c) for c in f"{k:03b}") for k in range(8)]
    e = dressed_energies(h, space, labels)
    to_mhz = 1e3 / TWO_PI
    e000 = e[(0, 0, 0)]
    z12 = e[(1, 1, 0)] - e[(1, 0, 0)] - e[(0, 1, 0)] + e000
    z23 = e[(0, 1, 1)] - e[(0, 1, 0)] - e[(0, 0, 1)] + e000
    z13 = e[(1, 0, 1)] - e[(1, 0, 0)] - e[(0, 0, 1)] + e000
    z123 = (e[(1, 1, 1)] - e[(1, 1, 0)] - e[(0, 1, 1)] - e[(1, 0, 1)]
            + e[(1, 0, 0)] + e[(0, 1, 0)] + e[(0, 0, 1)] - e000)
    zz = ZZCoefficients(z12 * to_mhz, z23 * to_mhz, z13 * to_mhz, z123 * to_mhz)
    if not all(np.isfinite(list(zz.as_dict().values()))):
        raise ArithmeticError("non-finite ZZ coefficient")
    return zz


def anticrossing(spec: DeviceSpec, shifts: Sequence[float], activation=None) -> tuple[np.ndarray, np.ndarray]:
    """Gap (GHz) between the two eigenstates carrying |101>/|020> weight vs a Qubit 2 shift.

    The minimum gap is 2|J| and locates the dressed resonance.
    """
    space = spec.space
    q2 = spec.qubits[1]
    i101 = basis_index(qubit_state((1, 0, 1), space), space)
    i020 = basis_index(qubit_state((0, 2, 0), space), space)
    controls = dict(activation or {})
    if activation is None:
        for a, b in spec.qubit_pairs():
            act = spec.activation(a, b)
            if act:
                controls[act[0]] = act[1]
    model = ControlModel(spec)
    gaps = []
    for s in shifts:
        values = dict(controls)
        values[q2] = values.get(q2, 0.0) + s
        evals, evecs = np.linalg.eigh(model.hamiltonian(values))
        weight = np.abs(evecs[i101]) ** 2 + np.abs(evecs[i020]) ** 2
        top = np.argsort(weight)[-2:]
        gaps.append(abs(evals[top[0]] - evals[top[1]]) / TWO_PI)
    return np.asarray(shifts, dtype=float), np.asarray(gaps)


def resonance_shift(spec: DeviceSpec, lo: float = -0.03, hi: float = 0.03, points: int = 121) -> tuple[float, float]:
    """Qubit 2 shift (GHz) at the dressed |101>/|020> anticrossing and |J| there (GHz)."""
    from scipy.optimize import minimize_scalar

    shifts, gaps = anticrossing(spec, np.linspace(lo, hi, points))
    k = int(np.argmin(gaps))
    step = shifts[1] - shifts[0]
    res = minimize_scalar(
        lambda s: anticrossing(spec, [s])[1][0],
        bounds=(shifts[k] - step, shifts[k] + step),
        method="bounded",
        options={"xatol": 1e-9},
    )
    return float(res.x), 0.5 * float(res.fun)


# --- stock devices -------------------------------------------------------

PAPER_QUBITS = (("Q1", 5.018), ("Q2", 5.18), ("Q3", 4.98))
PAPER_ANHARMONICITY = -0.35
PAPER_COUPLING = 0.015

# Synthetic coupler set for the five-mode model (not given in the source
# parameters). Couplers park at a zero-coupling point and are pulsed down to
# the activation frequency where the mediated coupling reaches the effective
# design value.
SYNTH_COUPLER_ON = {"C1": 6.4, "C2": 6.3}
SYNTH_COUPLER_OFF = 9.0
SYNTH_COUPLER_ANHARMONICITY = -0.2


def paper_device(levels: int = 3, coupling: float = PAPER_COUPLING, switchable: bool = True) -> DeviceSpec:
    modes = tuple(ModeSpec(label, f, PAPER_ANHARMONICITY, levels) for label, f in PAPER_QUBITS)
    return DeviceSpec(modes, {("Q1", "Q2"): coupling, ("Q2", "Q3"): coupling}, "effective", switchable)


def _pair_design(w_a, w_b, w_on, w_off, target):
    def bracket(wc):
        return (1 / (w_a - wc) + 1 / (w_b - wc) - 1 / (w_a + wc) - 1 / (w_b + wc))

    s_on, s_off = bracket(w_on), bracket(w_off)
    g_sq = 2 * target / (s_on - s_off)
    if g_sq <= 0:
        raise ValueError("coupler design has no real solution")
    g_qc = math.sqrt(g_sq)
    g_qq = -0.5 * g_sq * s_off
    return g_qc, g_qq


def synthetic_full_device(
    effective: DeviceSpec | None = None,
    coupler_levels: int = 2,
    coupler_on: Mapping[str, float] = SYNTH_COUPLER_ON,
    coupler_off: float = SYNTH_COUPLER_OFF,
    coupler_anharmonicity: float = SYNTH_COUPLER_ANHARMONICITY,
) -> DeviceSpec:
    """Five-mode device whose activated couplings reproduce ``effective``.

    Per pair, g_qc and g_qq are solved so the second-order coupling is zero at
    ``coupler_off`` and equals -g~ at the activation frequency (the sign of g~ is
    a gauge choice on Qubit 2 and does not change populations or diagonal
    phases). Bare qubit parameters are then iterated so the idle dressed
    frequencies and anharmonicities equal the effective ones.
    """
    eff = effective or paper_device()
    q1, q2, q3 = eff.qubits
    targets = {q: (eff.mode(q).frequency, eff.mode(q).anharmonicity) for q in (q1, q2, q3)}
    design = {}
    for (a, b), c in (((q1, q2), "C1"), ((q2, q3), "C2")):
        g_t = eff.coupling(a, b)
        g_qc, g_qq = _pair_design(targets[a][0], targets[b][0], coupler_on[c], coupler_off, -g_t)
        design[c] = (a, b, g_qc, g_qq)

    def make(bare):
        modes = (
            ModeSpec(q1, bare[q1][0], bare[q1][1], eff.mode(q1).levels),
            ModeSpec("C1", coupler_off, coupler_anharmonicity, coupler_levels, "coupler"),
            ModeSpec(q2, bare[q2][0], bare[q2][1], eff.mode(q2).levels),
            ModeSpec("C2", coupler_off, coupler_anharmonicity, coupler_levels, "coupler"),
            ModeSpec(q3, bare[q3][0], bare[q3][1], eff.mode(q3).levels),
        )
        couplings = {}
        for c, (a, b, g_qc, g_qq) in design.items():
            couplings[(a, c)] = g_qc
            couplings[(c, b)] = g_qc
            # charge-form coupling: exchange amplitude is minus the coefficient
            couplings[(a, b)] = -g_qq
        return DeviceSpec(modes, couplings, "full", True, dict(coupler_on), synthetic=True)

    bare = dict(targets)
    for _ in range(8):
        dev = make(bare)
        freqs, anh = dressed_qubit_parameters(dev)
        bare = {q: (bare[q][0] + targets[q][0] - freqs[q], bare[q][1] + targets[q][1] - anh[q]) for q in bare}
    return make(bare)


def dressed_qubit_parameters(spec: DeviceSpec, values: Mapping[str, float] | None = None):
    """Coupler-dressed qubit frequencies and anharmonicities (GHz).

    Each qubit is dressed with every coupling that touches it or its
    couplers' other legs removed, so qubit-qubit level repulsion (which the
    effective model adds back through g~) is not double counted.
    """
    freqs, anh = {}, {}
    qubits = spec.qubits
    for k, q in enumerate(qubits):
        others = set(qubits) - {q}
        kept = {pair: g for pair, g in spec.couplings.items() if not (set(pair) & others)}
        isolated = replace(spec, couplings=kept)
        h = ControlModel(isolated, frame=0.0).hamiltonian(values)
        labels = [(0, 0, 0)]
        for n in (1, 2):
            lab = [0, 0, 0]
            lab[k] = n
            labels.append(tuple(lab))
        e = dressed_energies(h, spec.space, labels)
        e1 = (e[labels[1]] - e[labels[0]]) / TWO_PI
        e2 = (e[labels[2]] - e[labels[0]]) / TWO_PI
        freqs[q] = e1
        anh[q] = e2 - 2 * e1
    return freqs, anh


def effective_from_full(full: DeviceSpec, activated: bool = True) -> DeviceSpec:
    """Effective three-qubit device matching the five-mode device's dressed qubits.

    Couplings come from :func:`effective_coupling` at the coupler activation
    (or idle) frequencies.
    """
    values = {}
    if activated:
        for c in full.couplers:
            values[c] = full.coupler_on.get(c, full.mode(c).frequency) - full.mode(c).frequency
    freqs, anh = dressed_qubit_parameters(full, values)
    qubits = full.qubits
    modes = tuple(ModeSpec(q, freqs[q], anh[q], full.mode(q).levels) for q in qubits)
    couplings = {}
    for a, b in full.qubit_pairs():
        c = full.coupler_between(a, b)
        wc = full.mode(c).frequency + values.get(c, 0.0)
        couplings[(a, b)] = effective_coupling(
            full.coupling(a, c), full.coupling(b, c), -full.coupling(a, b),
            full.mode(a).frequency, full.mode(b).frequency, wc,
        )
    return DeviceSpec(modes, couplings, "effective", switchable=not activated, synthetic=True)
