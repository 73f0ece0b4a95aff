"""Protocol unitaries as ordered two-level rotations (RF pulses).

Rotation convention, used for every angle in this repo: a pulse of angle
alpha and phase phi on transition (i, j) maps

    |i> -> cos(alpha/2)|i> + e^{+i phi} sin(alpha/2)|j>
    |j> -> -e^{-i phi} sin(alpha/2)|i> + cos(alpha/2)|j>

and leaves the third level alone. A 2*theta pulse on 0 <-> -1 therefore takes
|0> to |b> (phase 0) or |a> (phase pi), and the pi/2 pulse on 0 <-> -1 is
exactly the equal-prior Helstrom rotation.

Pulses run in list order, so the schedule's matrix is R_n ... R_2 R_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from engine.base import ProtocolKind
from engine.protocols import (
    Protocol,
    StatePair,
    SusdBasis,
    build_helstrom,
    check_theta,
    idp_amplitudes,
    idp_unitary,
    perpendicular_states,
    prepare_pair,
    susd_unitary,
)
from engine.qudit_core import MATRIX_TOL, LEVEL_INDEX, Operator, StateVector, identity

TWO_PI = 2.0 * math.pi

HELSTROM_ROTATION = Operator(
    np.array([[1, -1, 0], [1, 1, 0], [0, 0, math.sqrt(2)]], dtype=complex) / math.sqrt(2)
)


class Transition(str, Enum):
    T0_MINUS1 = "T0_minus1"
    T0_PLUS1 = "T0_plus1"

    @property
    def levels(self) -> Tuple[int, int]:
        other = "m-1" if self is Transition.T0_MINUS1 else "m+1"
        return LEVEL_INDEX["m0"], LEVEL_INDEX[other]


@dataclass(frozen=True)
class TwoLevelRotation:
    transition: Transition
    angle: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        # (alpha, phi) and (4pi - alpha, phi + pi) are the same matrix; fold alpha into [0, 2pi)
        angle = float(self.angle) % (2.0 * TWO_PI)
        phase = float(self.phase)
        if angle >= TWO_PI:
            angle, phase = 2.0 * TWO_PI - angle, phase + math.pi
        object.__setattr__(self, "transition", Transition(self.transition))
        object.__setattr__(self, "angle", angle)
        object.__setattr__(self, "phase", phase % TWO_PI)


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    pulses: Tuple[TwoLevelRotation, ...]
    intended_unitary: Operator
    # trailing relabeling pi-pulse, kept in `pulses` but outside intended_unitary
    has_final_pi: bool = False

    @property
    def working_pulses(self) -> Tuple[TwoLevelRotation, ...]:
        return self.pulses[:-1] if self.has_final_pi else self.pulses


def rotation_matrix(r: TwoLevelRotation) -> Operator:
    i, j = r.transition.levels
    c, s = math.cos(r.angle / 2.0), math.sin(r.angle / 2.0)
    m = np.eye(3, dtype=complex)
    m[i, i] = c
    m[j, j] = c
    m[j, i] = s * np.exp(1j * r.phase)
    m[i, j] = -s * np.exp(-1j * r.phase)
    return Operator(m)


def pulse_product(pulses: Sequence[TwoLevelRotation]) -> Operator:
    total = identity(3)
    for pulse in pulses:
        total = rotation_matrix(pulse) @ total
    return total


def schedule_unitary(s: PulseSchedule) -> Operator:
    """Everything the schedule does, relabeling pulse included."""
    return pulse_product(s.pulses)


def verify_schedule(s: PulseSchedule) -> float:
    """Max entrywise deviation of the working pulses from the intent, after global-phase alignment."""
    product = pulse_product(s.working_pulses).entries
    target = s.intended_unitary.entries
    overlap = np.trace(product.conj().T @ target)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.max(np.abs(product * phase - target)))


def schedule_passes(s: PulseSchedule) -> bool:
    return verify_schedule(s) <= MATRIX_TOL


def _final_pi() -> TwoLevelRotation:
    return TwoLevelRotation(Transition.T0_PLUS1, math.pi)


def compile_idp(theta: float) -> PulseSchedule:
    """theta_1 on 0<->+1, then theta_2 = pi/2 on 0<->-1, then the relabeling pi on 0<->+1."""
    theta = check_theta(theta)
    _, r = idp_amplitudes(theta)
    theta_1 = 2.0 * math.asin(r)
    pulses = (
        TwoLevelRotation(Transition.T0_PLUS1, theta_1),
        TwoLevelRotation(Transition.T0_MINUS1, math.pi / 2),
        _final_pi(),
    )
    return PulseSchedule(pulses, idp_unitary(theta), has_final_pi=True)


def compile_susd(theta: float, which_basis: SusdBasis) -> PulseSchedule:
    """+2*theta (A basis) or -2*theta (B basis) on 0<->-1, then pi on 0<->+1.

    The -2*theta pulse is stored as angle 2*theta with phase pi, which is the
    same rotation and keeps the angle inside [0, 2*pi).
    """
    theta = check_theta(theta)
    phase = 0.0 if SusdBasis(which_basis) is SusdBasis.A_BASIS else math.pi
    pulses = (TwoLevelRotation(Transition.T0_MINUS1, 2.0 * theta, phase), _final_pi())
    return PulseSchedule(pulses, susd_unitary(theta, which_basis), has_final_pi=True)


def compile_helstrom(theta_unused: Optional[float] = None, pair: Optional[StatePair] = None) -> PulseSchedule:
    """pi/2 on 0<->-1 then pi on 0<->+1; unequal priors tilt the first pulse."""
    if pair is None or pair.equal_priors:
        rotation = TwoLevelRotation(Transition.T0_MINUS1, math.pi / 2)
        intended = HELSTROM_ROTATION
    else:
        # build_helstrom returns FINAL_PI @ W with W = [[c, -s], [s, c]] on (m0, m-1).
        w = _undo_final_pi(build_helstrom(pair).pipelines[0].unitary)
        angle = 2.0 * math.atan2(w.entries[1, 0].real, w.entries[0, 0].real)
        rotation = TwoLevelRotation(Transition.T0_MINUS1, angle)
        intended = w
    return PulseSchedule((rotation, _final_pi()), intended, has_final_pi=True)


def compile_preparation(theta: float, which_state: str) -> PulseSchedule:
    """2*theta on 0<->-1 taking |0> to |a> (phase pi) or |b> (phase 0)."""
    theta = check_theta(theta)
    a, b = prepare_pair(theta)
    a_perp, b_perp = perpendicular_states(theta)
    plus = np.array([0.0, 0.0, 1.0])
    if which_state == "a":
        phase, columns = math.pi, (a.amplitudes, a_perp.amplitudes, plus)
    elif which_state == "b":
        phase, columns = 0.0, (b.amplitudes, -b_perp.amplitudes, plus)
    else:
        raise ValueError(f"which_state must be 'a' or 'b', got {which_state!r}")
    intended = Operator(np.column_stack(columns))
    return PulseSchedule((TwoLevelRotation(Transition.T0_MINUS1, 2.0 * theta, phase),), intended)


def compile_protocol(protocol: Protocol, pair: Optional[StatePair] = None) -> Tuple[PulseSchedule, ...]:
    """One schedule per pipeline of the protocol, in pipeline order."""
    theta = protocol.theta
    if protocol.kind is ProtocolKind.IDP:
        return (compile_idp(theta),)
    if protocol.kind is ProtocolKind.HELSTROM:
        return (compile_helstrom(theta, pair),)
    if protocol.kind is ProtocolKind.SUSD_A:
        return (compile_susd(theta, SusdBasis.A_BASIS),)
    if protocol.kind is ProtocolKind.SUSD_B:
        return (compile_susd(theta, SusdBasis.B_BASIS),)
    return compile_susd(theta, SusdBasis.A_BASIS), compile_susd(theta, SusdBasis.B_BASIS)


def _undo_final_pi(u: Operator) -> Operator:
    return rotation_matrix(_final_pi()).dagger @ u


def perturb(s: PulseSchedule, index: int, delta: float) -> PulseSchedule:
    pulses = list(s.pulses)
    pulses[index] = replace(pulses[index], angle=pulses[index].angle + delta)
    return PulseSchedule(tuple(pulses), s.intended_unitary, s.has_final_pi)


def schedule_to_text(s: PulseSchedule) -> str:
    return "".join(f"{p.transition.value} {p.angle:.12f} {p.phase:.12f}\n" for p in s.pulses)


def schedule_from_text(text: str, intended_unitary: Operator, has_final_pi: bool = False) -> PulseSchedule:
    pulses: List[TwoLevelRotation] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        transition, angle, phase = line.split()
        pulses.append(TwoLevelRotation(Transition(transition), float(angle), float(phase)))
    return PulseSchedule(tuple(pulses), intended_unitary, has_final_pi)


def apply_schedule(s: PulseSchedule, state: StateVector) -> StateVector:
    return StateVector(schedule_unitary(s).entries @ state.amplitudes)
