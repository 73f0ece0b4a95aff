from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Tuple


class ProtocolKind(str, Enum):
    SUSD_A = "SUSD_A"
    SUSD_B = "SUSD_B"
    SUSD_RANDOMIZED = "SUSD_RANDOMIZED"
    IDP = "IDP"
    HELSTROM = "HELSTROM"


@dataclass(frozen=True)
class Table1Row:
    """Values printed in the experiment's overview table."""

    efficiency: float
    multipositive: float
    error_low: float
    error_high: float
    error_text: str

    @property
    def error_target(self) -> float:
        return (self.error_low + self.error_high) / 2.0


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    kind: ProtocolKind
    dimension: int
    unambiguous: bool
    readout_order: Tuple[str, ...]
    table1: Table1Row
