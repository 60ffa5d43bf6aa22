"""Truncated multi-mode Fock space: basis indexing, ladder operators, projection.

Mode order is significant. Flat indices use a mixed-radix, row-major
encoding over the declared mode order, so ``(1, 0, 1)`` in a 3x3x3 space
is ``1*9 + 0*3 + 1 = 10``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Occupation or state index outside the truncated space."""


@dataclass(frozen=True)
class ModeSpec:
    """One bosonic mode (transmon or coupler) in GHz units.

    ``frequency`` and ``anharmonicity`` are ordinary frequencies (omega/2pi).
    """

    label: str
    frequency: float
    anharmonicity: float
    levels: int = 3
    kind: str = "qubit"

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"mode {self.label!r}: levels must be >= 2, got {self.levels}")
        if self.kind not in ("qubit", "coupler"):
            raise ValueError(f"mode {self.label!r}: unknown kind {self.kind!r}")


Space = Sequence[ModeSpec]


def dims(space: Space) -> tuple[int, ...]:
    return tuple(m.levels for m in space)


def dimension(space: Space) -> int:
    return int(np.prod(dims(space)))


def mode_position(space: Space, label: str) -> int:
    for k, m in enumerate(space):
        if m.label == label:
            return k
    raise KeyError(f"unknown mode {label!r}; have {[m.label for m in space]}")


def basis_index(occupations: Sequence[int], space: Space) -> int:
    """Flat index of a Fock state given one occupation per mode."""
    d = dims(space)
    if len(occupations) != len(d):
        raise DimensionError(f"expected {len(d)} occupations, got {len(occupations)}")
    index = 0
    for n, levels in zip(occupations, d):
        if not 0 <= n < levels:
            raise DimensionError(f"occupation {n} out of range for {levels}-level mode")
        index = index * levels + int(n)
    return index


def basis_state(index: int, space: Space) -> tuple[int, ...]:
    """Inverse of :func:`basis_index`."""
    d = dims(space)
    total = int(np.prod(d))
    if not 0 <= index < total:
        raise DimensionError(f"index {index} outside [0, {total})")
    occ = []
    for levels in reversed(d):
        index, n = divmod(index, levels)
        occ.append(n)
    return tuple(reversed(occ))


def ket(occupations: Sequence[int], space: Space) -> np.ndarray:
    v = np.zeros(dimension(space), dtype=complex)
    v[basis_index(occupations, space)] = 1.0
    return v


def _single_mode(kind: str, levels: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1)
    if kind == "lower":
        return a
    if kind == "raise":
        return a.T.copy()
    if kind == "number":
        return np.diag(np.arange(levels, dtype=float))
    if kind == "xi_plus":
        if levels < 3:
            raise DimensionError("xi_plus needs at least 3 levels on the mode")
        op = np.zeros((levels, levels))
        op[2, 0] = 1.0
        return op
    raise ValueError(f"unknown ladder kind {kind!r}")


def embed(local: np.ndarray, position: int, space: Space) -> np.ndarray:
    """Tensor a single-mode operator into the full space."""
    factors = [np.eye(levels) for levels in dims(space)]
    factors[position] = local
    return reduce(np.kron, factors).astype(complex)


def ladder(mode: str, kind: str, space: Space) -> np.ndarray:
    """``lower``, ``raise``, ``number`` or ``xi_plus`` (|2><0|) on one mode."""
    k = mode_position(space, mode)
    return embed(_single_mode(kind, space[k].levels), k, space)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol)


def check_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(op), initial=0.0)))
    if not is_hermitian(op, tol * scale):
        err = np.max(np.abs(op - op.conj().T))
        raise ValueError(f"operator not hermitian (max |M - M^dag| = {err:.3e})")
    return op


def state_indices(states: Iterable[Sequence[int]], space: Space) -> list[int]:
    idx = [basis_index(s, space) for s in states]
    if len(set(idx)) != len(idx):
        raise DimensionError("duplicate states in projection list")
    return idx


def project(op: np.ndarray, kept_states: Iterable[Sequence[int]], space: Space) -> np.ndarray:
    """Block ``<s_i|op|s_j>`` over ``kept_states`` in the given order."""
    idx = state_indices(kept_states, space)
    return op[np.ix_(idx, idx)]


def computational_states(space: Space, qubits: Sequence[str] | None = None) -> list[tuple[int, ...]]:
    """The 2^n qubit basis states (other modes in |0>), ordered |q1 q2 q3> binary."""
    labels = [m.label for m in space if m.kind == "qubit"] if qubits is None else list(qubits)
    pos = [mode_position(space, q) for q in labels]
    out = []
    for bits in np.ndindex(*(2,) * len(pos)):
        occ = [0] * len(space)
        for p, b in zip(pos, bits):
            occ[p] = b
        out.append(tuple(occ))
    return out


def qubit_state(qubit_occ: Sequence[int], space: Space) -> tuple[int, ...]:
    """Lift a qubit-only label such as (1, 0, 1) to the full mode tuple."""
    qpos = [k for k, m in enumerate(space) if m.kind == "qubit"]
    if len(qubit_occ) != len(qpos):
        raise DimensionError(f"expected {len(qpos)} qubit occupations, got {len(qubit_occ)}")
    occ = [0] * len(space)
    for p, n in zip(qpos, qubit_occ):
        occ[p] = int(n)
    return tuple(occ)
