from __future__ import annotations

from typing import Optional

from engine.protocols import StatePair, SusdBasis
from engine.pulse_compiler import PulseSchedule, compile_helstrom, compile_idp, compile_susd, schedule_to_text, verify_schedule


def build_schedule(protocol: str, theta: float, basis: Optional[str] = None, prior_a: float = 0.5) -> PulseSchedule:
    if protocol == "idp":
        return compile_idp(theta)
    if protocol == "susd":
        return compile_susd(theta, SusdBasis(basis or SusdBasis.A_BASIS.value))
    if protocol == "helstrom":
        return compile_helstrom(theta, StatePair(theta, prior_a, 1.0 - prior_a))
    raise ValueError(f"unknown protocol {protocol!r}; expected susd, idp or helstrom")


def render_schedule(protocol: str, theta: float, basis: Optional[str] = None, prior_a: float = 0.5) -> str:
    schedule = build_schedule(protocol, theta, basis, prior_a)
    header = f"# {protocol} theta={theta:.12f} residual={verify_schedule(schedule):.3e}\n"
    return header + schedule_to_text(schedule)
