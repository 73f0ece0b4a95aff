"""Exact linear algebra on the m_I = 0, -1, +1 levels of a spin-1 system.

Basis ordering is fixed as (m0, m-1, m+1): |0> = [1,0,0]^T, |-1> = [0,1,0]^T,
|+1> = [0,0,1]^T. Two-dimensional states live on (m0, m-1) and are embedded
into three dimensions only through `embed`, never implicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

LEVELS: Tuple[str, ...] = ("m0", "m-1", "m+1")
LEVEL_INDEX: Dict[str, int] = {label: i for i, label in enumerate(LEVELS)}

STATE_TOL = 1e-12
MATRIX_TOL = 1e-10
PSD_TOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class NotUnitary(ValueError):
    pass


class InvalidState(ValueError):
    pass


class InvalidPovm(ValueError):
    pass


class Outcome(str, Enum):
    A = "A"
    B = "B"
    INCONCLUSIVE = "Inconclusive"
    UNUSED = "Unused"


def _frozen(values: Iterable, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _labels_for(dim: int) -> Tuple[str, ...]:
    if dim not in (2, 3):
        raise DimensionMismatch(f"dimension must be 2 or 3, got {dim}")
    return LEVELS[:dim]


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    basis_labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes).reshape(-1)
        labels = tuple(self.basis_labels) or _labels_for(amps.shape[0])
        if labels != _labels_for(amps.shape[0]):
            raise DimensionMismatch(f"basis labels {labels} do not match dimension {amps.shape[0]}")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > STATE_TOL:
            raise InvalidState(f"squared norm {norm_sq!r} differs from 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis_labels", labels)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.shape[0])

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.basis_labels.index(label)])


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray
    basis_labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {entries.shape}")
        labels = tuple(self.basis_labels) or _labels_for(entries.shape[0])
        if labels != _labels_for(entries.shape[0]):
            raise DimensionMismatch(f"basis labels {labels} do not match dimension {entries.shape[0]}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "basis_labels", labels)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def dagger(self) -> "Operator":
        return Operator(self.entries.conj().T, self.basis_labels)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self.basis_labels, other.basis_labels)
        return Operator(self.entries @ other.entries, self.basis_labels)


@dataclass(frozen=True, eq=False)
class Povm:
    elements: Tuple[Tuple[Outcome, Operator], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple((Outcome(lbl), op) for lbl, op in self.elements))

    @property
    def dim(self) -> int:
        return self.elements[0][1].dim if self.elements else 0

    def labels(self) -> List[Outcome]:
        seen: List[Outcome] = []
        for label, _ in self.elements:
            if label not in seen:
                seen.append(label)
        return seen


@dataclass(frozen=True, eq=False)
class PovmReport:
    hermiticity_residual: float
    min_eigenvalue: float
    completeness_residual: float
    passed: bool
    problems: Tuple[str, ...] = field(default_factory=tuple)


def _check_same_space(x: Sequence[str], y: Sequence[str]) -> None:
    if tuple(x) != tuple(y):
        raise DimensionMismatch(f"basis mismatch: {tuple(x)} vs {tuple(y)}")


def basis_state(label: str, dim: int = 3) -> StateVector:
    labels = _labels_for(dim)
    if label not in labels:
        raise DimensionMismatch(f"level {label!r} not in {labels}")
    amps = np.zeros(dim, dtype=complex)
    amps[labels.index(label)] = 1.0
    return StateVector(amps)


def embed(state: StateVector) -> StateVector:
    """Zero-pad a (m0, m-1) state with an m+1 amplitude of 0."""
    if state.dim == 3:
        return state
    return StateVector(np.concatenate([state.amplitudes, [0.0]]))


def identity(dim: int = 3) -> Operator:
    return Operator(np.eye(dim, dtype=complex))


def outer(x: StateVector, y: StateVector) -> Operator:
    _check_same_space(x.basis_labels, y.basis_labels)
    return Operator(np.outer(x.amplitudes, y.amplitudes.conj()), x.basis_labels)


def projector(s: StateVector) -> Operator:
    return outer(s, s)


def inner_product(x: StateVector, y: StateVector) -> complex:
    """<x|y>, conjugate-linear in x."""
    _check_same_space(x.basis_labels, y.basis_labels)
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def unitarity_residual(u: Operator) -> float:
    return float(np.max(np.abs(u.entries.conj().T @ u.entries - np.eye(u.dim))))


def apply_unitary(u: Operator, s: StateVector) -> StateVector:
    _check_same_space(u.basis_labels, s.basis_labels)
    residual = unitarity_residual(u)
    if residual > MATRIX_TOL:
        raise NotUnitary(f"u^dagger u deviates from identity by {residual:.3e}")
    return StateVector(u.entries @ s.amplitudes, s.basis_labels)


def validate_povm(m: Povm) -> PovmReport:
    if not m.elements:
        return PovmReport(0.0, 0.0, float("inf"), False, ("empty measurement",))

    labels = m.elements[0][1].basis_labels
    if any(op.basis_labels != labels for _, op in m.elements):
        return PovmReport(float("inf"), float("-inf"), float("inf"), False, ("elements act on different spaces",))

    herm = 0.0
    min_eig = float("inf")
    total = np.zeros((len(labels), len(labels)), dtype=complex)
    for _, op in m.elements:
        e = op.entries
        herm = max(herm, float(np.max(np.abs(e - e.conj().T))))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh((e + e.conj().T) / 2))))
        total = total + e
    completeness = float(np.max(np.abs(total - np.eye(len(labels)))))

    problems: List[str] = []
    if herm > STATE_TOL:
        problems.append(f"not hermitian (residual {herm:.3e})")
    if min_eig < -PSD_TOL:
        problems.append(f"not positive semidefinite (min eigenvalue {min_eig:.3e})")
    if completeness > MATRIX_TOL:
        problems.append(f"elements do not sum to identity (residual {completeness:.3e})")
    return PovmReport(herm, min_eig, completeness, not problems, tuple(problems))


def born_probabilities(s: StateVector, m: Povm) -> Dict[Outcome, float]:
    report = validate_povm(m)
    if not report.passed:
        raise InvalidPovm("; ".join(report.problems))
    _check_same_space(s.basis_labels, m.elements[0][1].basis_labels)

    probs: Dict[Outcome, float] = {label: 0.0 for label in m.labels()}
    for label, op in m.elements:
        p = float(np.vdot(s.amplitudes, op.entries @ s.amplitudes).real)
        probs[label] += p
    return {label: min(1.0, max(0.0, p)) for label, p in probs.items()}


def level_probabilities(s: StateVector) -> np.ndarray:
    return np.abs(s.amplitudes) ** 2


def overlap_of(theta: float) -> float:
    return float(np.cos(2.0 * theta))


def theta_from_overlap(overlap: float) -> float:
    if not -STATE_TOL <= overlap <= 1.0 + STATE_TOL:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return float(np.arccos(min(1.0, max(0.0, overlap))) / 2.0)


def rank_one_povm(vectors: Sequence[Tuple[Outcome, StateVector]], rest: Optional[Outcome] = None) -> Povm:
    """Projectors onto the given vectors; `rest` labels the orthogonal complement if any."""
    elements = [(label, projector(v)) for label, v in vectors]
    if rest is not None:
        dim = vectors[0][1].dim
        covered = sum((op.entries for _, op in elements), np.zeros((dim, dim), dtype=complex))
        elements.append((rest, Operator(np.eye(dim) - covered)))
    return Povm(tuple(elements))
