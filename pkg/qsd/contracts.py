from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from engine.protocols import check_theta
from engine.registry import PROTOCOL_ORDER, PROTOCOL_REGISTRY

MODES = ("ideal", "montecarlo", "both")
NOISE_CHOICES = ("zero", "calibrated", "default", "explicit")

CSV_COLUMNS = [
    "protocol",
    "mode",
    "theta_rad",
    "overlap",
    "shots",
    "p_corr",
    "p_err",
    "p_inconclusive",
    "p_noresult",
    "p_multipositive",
    "efficiency",
    "stderr_corr",
    "stderr_err",
    "stderr_inconclusive",
]


def default_thetas() -> Tuple[float, ...]:
    """17 overlaps from 0 to 1 in steps of 1/16."""
    return tuple(math.acos(k / 16.0) / 2.0 for k in range(17))


class RunConfig(BaseModel):
    protocols: Tuple[str, ...] = PROTOCOL_ORDER
    thetas: Tuple[float, ...] = Field(default_factory=default_thetas)
    shots: int = 100_000
    mode: str = "ideal"
    noise: str = "zero"
    noise_explicit: Dict[str, float] = Field(default_factory=dict, alias="noiseExplicit")
    readout_order: Dict[str, Tuple[str, ...]] = Field(default_factory=dict, alias="readoutOrder")
    seed: Optional[int] = None
    out: Optional[str] = None
    workers: int = Field(1, ge=1)
    resolution: int = Field(512, ge=64)
    calibration_shots: int = Field(4000, ge=1, alias="calibrationShots")
    calibration_path: Optional[str] = Field(default=None, alias="calibrationPath")

    model_config = {"populate_by_name": True}

    @field_validator("protocols")
    @classmethod
    def _known_protocols(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if not value:
            raise ValueError("protocol set must not be empty")
        unknown = [p for p in value if p not in PROTOCOL_REGISTRY]
        if unknown:
            raise ValueError(f"unknown protocols {unknown}; expected a subset of {list(PROTOCOL_ORDER)}")
        return tuple(dict.fromkeys(value))

    @field_validator("thetas")
    @classmethod
    def _thetas_in_range(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("theta grid must not be empty")
        return tuple(check_theta(t) for t in value)

    @field_validator("mode")
    @classmethod
    def _mode(cls, value: str) -> str:
        if value not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {value!r}")
        return value

    @field_validator("noise")
    @classmethod
    def _noise(cls, value: str) -> str:
        if value not in NOISE_CHOICES:
            raise ValueError(f"noise must be one of {NOISE_CHOICES}, got {value!r}")
        return value

    @model_validator(mode="after")
    def _montecarlo_needs_seed_and_shots(self) -> "RunConfig":
        if self.mode != "ideal":
            if self.seed is None:
                raise ValueError("a seed is required in montecarlo mode; pass --seed or set seed in the config")
            if self.shots < 1:
                raise ValueError(f"shots must be >= 1 in montecarlo mode, got {self.shots}")
        if self.noise_explicit and self.noise != "explicit":
            raise ValueError("noise probabilities may only be given with noise = explicit")
        return self


class Table1Entry(BaseModel):
    protocol: str
    dimension: int
    unambiguous: bool
    simulated_efficiency_pct: float = Field(..., alias="simulatedEfficiencyPct")
    simulated_error_pct: float = Field(..., alias="simulatedErrorPct")
    simulated_excess_error_pct: float = Field(..., alias="simulatedExcessErrorPct")
    simulated_multipositive_pct: float = Field(..., alias="simulatedMultipositivePct")
    printed_efficiency_pct: float = Field(..., alias="printedEfficiencyPct")
    printed_error_pct: str = Field(..., alias="printedErrorPct")
    printed_multipositive_pct: float = Field(..., alias="printedMultipositivePct")

    model_config = {"populate_by_name": True}


class FigureChecks(BaseModel):
    corr_ordering: bool = Field(..., alias="corrOrdering")
    inconclusive_ordering: bool = Field(..., alias="inconclusiveOrdering")
    error_ordering_near_one: bool = Field(..., alias="errorOrderingNearOne")
    details: List[str] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class Table1Report(BaseModel):
    status: str
    noise: str
    shots: int
    seed: int
    grid_points: int = Field(..., alias="gridPoints")
    entries: List[Table1Entry]
    figure_checks: FigureChecks = Field(..., alias="figureChecks")

    model_config = {"populate_by_name": True}


class OraclePoint(BaseModel):
    theta: float
    overlap: float
    min_error_oracle: float = Field(..., alias="minErrorOracle")
    min_error_closed_form: float = Field(..., alias="minErrorClosedForm")
    usd_failure_oracle: float = Field(..., alias="usdFailureOracle")
    usd_failure_closed_form: float = Field(..., alias="usdFailureClosedForm")

    model_config = {"populate_by_name": True}


class OracleReport(BaseModel):
    status: str
    resolution: int
    max_min_error_deviation: float = Field(..., alias="maxMinErrorDeviation")
    max_usd_failure_deviation: float = Field(..., alias="maxUsdFailureDeviation")
    points: List[OraclePoint]

    model_config = {"populate_by_name": True}
