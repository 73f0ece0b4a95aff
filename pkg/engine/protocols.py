"""The three discrimination protocols as (unitary, level measurement, relabeling) pipelines.

Every pipeline ends with the pi-pulse on the 0 <-> +1 transition, so the
working unitary of a pipeline is FINAL_PI @ W where W rotates the measurement
basis onto the levels. Ideal statistics come from the Born rule applied to
the effective measurement U^dagger |l><l| U of each level l.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from engine.base import ProtocolKind
from engine.qudit_core import (
    LEVELS,
    STATE_TOL,
    Operator,
    Outcome,
    Povm,
    StateVector,
    born_probabilities,
    inner_product,
    theta_from_overlap,
)

logger = logging.getLogger(__name__)

QUARTER_PI = math.pi / 4

# pi-pulse on 0 <-> +1: |0> -> |+1>, |+1> -> -|0>.
FINAL_PI = Operator(np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], dtype=complex))


class ThetaOutOfRange(ValueError):
    pass


class UnsupportedConfiguration(ValueError):
    pass


class SusdBasis(str, Enum):
    A_BASIS = "A_basis"
    B_BASIS = "B_basis"


class IdpLabeling(str, Enum):
    # A on m+1, B on m-1: where idp_unitary followed by the final pi-pulse sends a and b.
    DERIVED = "derived"
    # A on m-1, B on m+1; with idp_unitary this swaps the conclusive outcomes.
    SWAPPED = "swapped"


def check_theta(theta: float) -> float:
    if not (-STATE_TOL <= theta <= QUARTER_PI + STATE_TOL):
        raise ThetaOutOfRange(f"theta must lie in [0, pi/4], got {theta!r}")
    return min(QUARTER_PI, max(0.0, float(theta)))


@dataclass(frozen=True)
class StatePair:
    theta: float
    prior_a: float = 0.5
    prior_b: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", check_theta(self.theta))
        if self.prior_a < 0 or self.prior_b < 0 or abs(self.prior_a + self.prior_b - 1.0) > STATE_TOL:
            raise ValueError(f"priors must be non-negative and sum to 1, got {self.prior_a}, {self.prior_b}")

    @classmethod
    def from_overlap(cls, overlap: float, prior_a: float = 0.5) -> "StatePair":
        return cls(theta_from_overlap(overlap), prior_a, 1.0 - prior_a)

    @property
    def overlap(self) -> float:
        return math.cos(2.0 * self.theta)

    @property
    def equal_priors(self) -> bool:
        return abs(self.prior_a - 0.5) <= STATE_TOL

    def states(self) -> Tuple[StateVector, StateVector]:
        return prepare_pair(self.theta)


def prepare_pair(theta: float) -> Tuple[StateVector, StateVector]:
    theta = check_theta(theta)
    c, s = math.cos(theta), math.sin(theta)
    return StateVector([c, -s, 0.0]), StateVector([c, s, 0.0])


def perpendicular_states(theta: float) -> Tuple[StateVector, StateVector]:
    """|a_perp> = sin|0> + cos|-1>, |b_perp> = sin|0> - cos|-1>."""
    theta = check_theta(theta)
    c, s = math.cos(theta), math.sin(theta)
    return StateVector([s, c, 0.0]), StateVector([s, -c, 0.0])


def idp_amplitudes(theta: float) -> Tuple[float, float]:
    t = math.tan(check_theta(theta))
    rest = 1.0 - t * t
    if rest < 1e-15:
        return 1.0, 0.0
    return t, math.sqrt(rest)


def idp_basis(theta: float) -> Tuple[StateVector, StateVector, StateVector]:
    """(|a~>, |b~>, |?>): |a~> is orthogonal to |b>, |b~> to |a>."""
    t, r = idp_amplitudes(theta)
    h = 1.0 / math.sqrt(2.0)
    return (
        StateVector([h * t, -h, -h * r]),
        StateVector([h * t, h, -h * r]),
        StateVector([r, 0.0, t]),
    )


def _rows(*vectors: StateVector) -> Operator:
    """sum_k |e_k><v_k|."""
    return Operator(np.array([v.amplitudes.conj() for v in vectors]))


def idp_unitary(theta: float) -> Operator:
    return _rows(*idp_basis(theta))


def susd_unitary(theta: float, which_basis: SusdBasis) -> Operator:
    """U_a = |0><a| + |-1><a_perp|; U_b = |0><b| - |-1><b_perp| (a proper rotation)."""
    a, b = prepare_pair(theta)
    a_perp, b_perp = perpendicular_states(theta)
    plus = StateVector([0.0, 0.0, 1.0])
    if SusdBasis(which_basis) is SusdBasis.A_BASIS:
        return _rows(a, a_perp, plus)
    minus_b_perp = StateVector(-b_perp.amplitudes)
    return _rows(b, minus_b_perp, plus)


def helstrom_basis(weight_a: float, weight_b: float, a: StateVector, b: StateVector) -> Tuple[StateVector, StateVector]:
    """Eigenbasis of weight_a|a><a| - weight_b|b><b| on the (m0, m-1) span.

    The eigenvector with the larger eigenvalue detects a. For real states the
    signs are fixed so that rows (v_a, v_b) form [[c, -s], [s, c]] with s >= 0,
    a single pulse on the 0 <-> -1 transition.
    """
    gamma = weight_a * np.outer(a.amplitudes[:2], a.amplitudes[:2].conj()) - weight_b * np.outer(
        b.amplitudes[:2], b.amplitudes[:2].conj()
    )
    if np.max(np.abs(gamma.imag)) <= STATE_TOL:
        _, vecs = np.linalg.eigh(gamma.real)
        v_b, v_a = vecs[:, 0], vecs[:, 1]
        if np.linalg.det(np.array([v_a, v_b])) < 0:
            v_b = -v_b
        if v_b[0] < 0:
            v_a, v_b = -v_a, -v_b
    else:
        _, vecs = np.linalg.eigh(gamma)
        v_b, v_a = vecs[:, 0], vecs[:, 1]
    return StateVector(np.append(v_a, 0.0)), StateVector(np.append(v_b, 0.0))


@dataclass(frozen=True, eq=False)
class Pipeline:
    unitary: Operator
    level_labels: Tuple[Tuple[str, Outcome], ...]
    weight: float = 1.0

    def __post_init__(self) -> None:
        levels = [lvl for lvl, _ in self.level_labels]
        if sorted(levels) != sorted(LEVELS) or len(set(levels)) != len(levels):
            raise ValueError(f"relabeling must cover every level exactly once, got {levels}")

    @property
    def labels(self) -> Dict[str, Outcome]:
        return dict(self.level_labels)

    @property
    def povm(self) -> Povm:
        """Per-level effective measurement U^dagger |l><l| U in the input frame."""
        u = self.unitary.entries
        labels = self.labels
        return Povm(
            tuple(
                (labels[lvl], Operator(np.outer(u[i].conj(), u[i])))
                for i, lvl in enumerate(LEVELS)
            )
        )

    def label_codes(self) -> np.ndarray:
        """Outcome per level index, as indexes into OUTCOME_ORDER."""
        labels = self.labels
        return np.array([OUTCOME_ORDER.index(labels[lvl]) for lvl in LEVELS], dtype=np.int64)


OUTCOME_ORDER: Tuple[Outcome, ...] = (Outcome.A, Outcome.B, Outcome.INCONCLUSIVE, Outcome.UNUSED)


@dataclass(frozen=True, eq=False)
class Protocol:
    kind: ProtocolKind
    theta: float
    pipelines: Tuple[Pipeline, ...]

    def __post_init__(self) -> None:
        total = sum(p.weight for p in self.pipelines)
        if not self.pipelines or abs(total - 1.0) > STATE_TOL:
            raise ValueError(f"pipeline weights must sum to 1, got {total}")

    @property
    def unambiguous(self) -> bool:
        return self.kind is not ProtocolKind.HELSTROM


@dataclass(frozen=True)
class IdealStats:
    p_corr: float
    p_err: float
    p_inconclusive: float
    conditional: Dict[str, Dict[Outcome, float]]


def _pipeline(w: Operator, labels: Iterable[Tuple[str, Outcome]], weight: float = 1.0) -> Pipeline:
    return Pipeline(FINAL_PI @ w, tuple(labels), weight)


def _susd_pipeline(theta: float, which_basis: SusdBasis, weight: float) -> Pipeline:
    # The perpendicular outcome lands on m-1 and names the OTHER state.
    conclusive = Outcome.B if SusdBasis(which_basis) is SusdBasis.A_BASIS else Outcome.A
    return _pipeline(
        susd_unitary(theta, which_basis),
        (("m0", Outcome.UNUSED), ("m-1", conclusive), ("m+1", Outcome.INCONCLUSIVE)),
        weight,
    )


def build_susd(pair: StatePair, which_basis: Optional[SusdBasis] = None) -> Protocol:
    """Fixed-basis SUSD, or the randomized variant when `which_basis` is None."""
    if which_basis is None:
        return Protocol(
            ProtocolKind.SUSD_RANDOMIZED,
            pair.theta,
            (
                _susd_pipeline(pair.theta, SusdBasis.A_BASIS, 0.5),
                _susd_pipeline(pair.theta, SusdBasis.B_BASIS, 0.5),
            ),
        )
    which_basis = SusdBasis(which_basis)
    kind = ProtocolKind.SUSD_A if which_basis is SusdBasis.A_BASIS else ProtocolKind.SUSD_B
    return Protocol(kind, pair.theta, (_susd_pipeline(pair.theta, which_basis, 1.0),))


def build_idp(pair: StatePair, labeling: IdpLabeling = IdpLabeling.DERIVED) -> Protocol:
    if not pair.equal_priors:
        raise UnsupportedConfiguration("IDP is only defined here for equal priors p_a = p_b = 1/2")
    if IdpLabeling(labeling) is IdpLabeling.SWAPPED:
        logger.warning("IDP with swapped labeling (A on m-1, B on m+1): conclusive outcomes are not unambiguous")
        labels = (("m0", Outcome.INCONCLUSIVE), ("m-1", Outcome.A), ("m+1", Outcome.B))
    else:
        labels = (("m0", Outcome.INCONCLUSIVE), ("m-1", Outcome.B), ("m+1", Outcome.A))
    return Protocol(ProtocolKind.IDP, pair.theta, (_pipeline(idp_unitary(pair.theta), labels),))


def build_helstrom(pair: StatePair) -> Protocol:
    if pair.equal_priors:
        h = 1.0 / math.sqrt(2.0)
        v_a, v_b = StateVector([h, -h, 0.0]), StateVector([h, h, 0.0])
    else:
        a, b = pair.states()
        v_a, v_b = helstrom_basis(pair.prior_a, pair.prior_b, a, b)
    w = _rows(v_a, v_b, StateVector([0.0, 0.0, 1.0]))
    labels = (("m0", Outcome.UNUSED), ("m-1", Outcome.B), ("m+1", Outcome.A))
    return Protocol(ProtocolKind.HELSTROM, pair.theta, (_pipeline(w, labels),))


def build_protocol(kind: ProtocolKind, pair: StatePair) -> Protocol:
    kind = ProtocolKind(kind)
    if kind is ProtocolKind.IDP:
        return build_idp(pair)
    if kind is ProtocolKind.HELSTROM:
        return build_helstrom(pair)
    if kind is ProtocolKind.SUSD_A:
        return build_susd(pair, SusdBasis.A_BASIS)
    if kind is ProtocolKind.SUSD_B:
        return build_susd(pair, SusdBasis.B_BASIS)
    return build_susd(pair)


def conditional_table(protocol: Protocol, pair: StatePair) -> Dict[str, Dict[Outcome, float]]:
    a, b = pair.states()
    table: Dict[str, Dict[Outcome, float]] = {}
    for name, state in (("a", a), ("b", b)):
        row = {Outcome.A: 0.0, Outcome.B: 0.0, Outcome.INCONCLUSIVE: 0.0}
        for pipeline in protocol.pipelines:
            for label, p in born_probabilities(state, pipeline.povm).items():
                if label in row:
                    row[label] += pipeline.weight * p
        table[name] = row
    return table


def ideal_stats(protocol: Protocol, pair: StatePair) -> IdealStats:
    if abs(protocol.theta - pair.theta) > STATE_TOL:
        raise ValueError(f"protocol was built for theta={protocol.theta}, not {pair.theta}")
    cond = conditional_table(protocol, pair)
    pa, pb = pair.prior_a, pair.prior_b
    return IdealStats(
        p_corr=pa * cond["a"][Outcome.A] + pb * cond["b"][Outcome.B],
        p_err=pa * cond["a"][Outcome.B] + pb * cond["b"][Outcome.A],
        p_inconclusive=pa * cond["a"][Outcome.INCONCLUSIVE] + pb * cond["b"][Outcome.INCONCLUSIVE],
        conditional=cond,
    )


def helstrom_bound(pair: StatePair) -> float:
    a, b = pair.states()
    ov2 = abs(inner_product(a, b)) ** 2
    return 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * pair.prior_a * pair.prior_b * ov2)))


def susd_failure_probability(pair: StatePair, which_basis: SusdBasis) -> float:
    """p_? = p_i + p_j |<i|j>|^2 where i is the state the basis contains."""
    ov2 = pair.overlap**2
    if SusdBasis(which_basis) is SusdBasis.A_BASIS:
        return pair.prior_a + pair.prior_b * ov2
    return pair.prior_b + pair.prior_a * ov2


def best_susd_basis(pair: StatePair) -> SusdBasis:
    """Basis with the lower failure probability: the one whose conclusive outcome names the more likely state."""
    a_fail = susd_failure_probability(pair, SusdBasis.A_BASIS)
    b_fail = susd_failure_probability(pair, SusdBasis.B_BASIS)
    return SusdBasis.A_BASIS if a_fail <= b_fail else SusdBasis.B_BASIS

