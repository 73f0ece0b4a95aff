"""Fit the readout noise model to the efficiencies and error rates of the overview table.

The fit is a deterministic coordinate descent over the noise probabilities; when
no step improves the loss, every other readout order is tried before the steps
shrink. Every candidate is simulated with the same seeds (common random numbers), so
the loss surface is a fixed function of the profile and small steps compare
fairly. The model family is underdetermined; the fitted values carry no claim
beyond reproducing the targets.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from engine.base import Table1Row
from engine.protocols import StatePair, build_protocol, ideal_stats
from engine.readout_sim import NoiseProfile, cell_seed, run_batch
from engine.registry import PROTOCOL_ORDER, PROTOCOL_REGISTRY, get_spec

logger = logging.getLogger(__name__)

CALIBRATION_OVERLAPS: Tuple[float, ...] = tuple(float(x) for x in np.linspace(0.0, 1.0, 9))
METRICS = ("efficiency", "multipositive", "error")
DEFAULT_WEIGHTS: Dict[str, float] = {"efficiency": 4.0, "multipositive": 0.25, "error": 0.25}
# a fit that stalls with an efficiency further than this from its target is not converged
EFFICIENCY_TOLERANCE = 0.03

_INITIAL_STEPS: Dict[str, float] = {
    "p_init_fail": 0.02,
    "p_true_positive": 0.02,
    "p_false_positive_neighbor": 0.01,
    "p_false_positive_far": 0.002,
    "p_flip_per_probe": 0.005,
    "p_pulse_error": 0.01,
}
FIT_PARAMETERS: Tuple[str, ...] = tuple(_INITIAL_STEPS)
_MIN_STEP_FRACTION = 1.0 / 64


@dataclass(frozen=True)
class CalibrationTargets:
    efficiency: float
    multipositive: float
    error: float

    @classmethod
    def from_table1(cls, row: Table1Row) -> "CalibrationTargets":
        return cls(efficiency=row.efficiency, multipositive=row.multipositive, error=row.error_target)

    def as_dict(self) -> Dict[str, float]:
        return {"efficiency": self.efficiency, "multipositive": self.multipositive, "error": self.error}


def table1_targets() -> Dict[str, CalibrationTargets]:
    return {name: CalibrationTargets.from_table1(spec.table1) for name, spec in PROTOCOL_REGISTRY.items()}


@dataclass(frozen=True)
class ProtocolMetrics:
    """Grid averages: efficiency, multi-positive fraction, excess error among trials with a result."""

    efficiency: float
    multipositive: float
    error: float

    def as_dict(self) -> Dict[str, float]:
        return {"efficiency": self.efficiency, "multipositive": self.multipositive, "error": self.error}


@dataclass(frozen=True)
class CalibrationReport:
    profile: NoiseProfile
    loss: float
    converged: bool
    iterations: int
    evaluations: int
    # residuals[protocol][metric] = (simulated, target, relative deviation)
    residuals: Dict[str, Dict[str, Tuple[float, float, float]]] = field(default_factory=dict)
    off_target: Tuple[str, ...] = ()
    warning: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "profile": self.profile.model_dump(by_alias=True),
            "loss": self.loss,
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "off_target": list(self.off_target),
            "residuals": {
                name: {metric: {"simulated": s, "target": t, "relative": r} for metric, (s, t, r) in per.items()}
                for name, per in self.residuals.items()
            },
            "warning": self.warning,
        }


def simulate_metrics(
    noise: NoiseProfile,
    overlaps: Sequence[float] = CALIBRATION_OVERLAPS,
    shots: int = 4000,
    seed: int = 0,
    workers: int = 1,
    protocols: Sequence[str] = PROTOCOL_ORDER,
) -> Dict[str, ProtocolMetrics]:
    metrics: Dict[str, ProtocolMetrics] = {}
    for name in protocols:
        ordinal = PROTOCOL_ORDER.index(name)
        kind = get_spec(name).kind
        eff, multi, err = [], [], []
        for i, overlap in enumerate(overlaps):
            pair = StatePair.from_overlap(overlap)
            protocol = build_protocol(kind, pair)
            row = run_batch(protocol, None, pair, noise, shots, cell_seed(seed, ordinal, i), workers)
            eff.append(row.efficiency)
            multi.append(row.p_multipositive)
            err.append(row.p_err_given_result - ideal_stats(protocol, pair).p_err)
        metrics[name] = ProtocolMetrics(float(np.mean(eff)), float(np.mean(multi)), float(np.mean(err)))
    return metrics


def _residuals(
    metrics: Dict[str, ProtocolMetrics], targets: Dict[str, CalibrationTargets]
) -> Dict[str, Dict[str, Tuple[float, float, float]]]:
    out: Dict[str, Dict[str, Tuple[float, float, float]]] = {}
    for name, target in targets.items():
        simulated = metrics[name].as_dict()
        out[name] = {}
        for metric, t in target.as_dict().items():
            s = simulated[metric]
            out[name][metric] = (s, t, (s - t) / t if t else s)
    return out


def _loss(residuals: Dict[str, Dict[str, Tuple[float, float, float]]], weights: Dict[str, float]) -> float:
    return float(sum(weights[m] * r * r for per in residuals.values() for m, (_, _, r) in per.items()))


def _bounds(profile: NoiseProfile, name: str) -> Tuple[float, float]:
    if name == "p_true_positive":
        return profile.p_false_positive_neighbor, 1.0
    if name == "p_false_positive_neighbor":
        return profile.p_false_positive_far, profile.p_true_positive
    if name == "p_false_positive_far":
        return 0.0, profile.p_false_positive_neighbor
    return 0.0, 1.0


def _moved(profile: NoiseProfile, name: str, delta: float) -> Optional[NoiseProfile]:
    low, high = _bounds(profile, name)
    current = getattr(profile, name)
    value = min(high, max(low, current + delta))
    if value == current:
        return None
    return NoiseProfile.model_validate({**profile.model_dump(), name: value})


def _reordered(profile: NoiseProfile, protocols: Sequence[str]) -> Iterator[NoiseProfile]:
    """Every other readout order of the same levels, one protocol at a time."""
    for name in protocols:
        current = profile.readout_order[name]
        for order in permutations(current):
            if order != current:
                yield NoiseProfile.model_validate(
                    {**profile.model_dump(), "readout_order": {**profile.readout_order, name: order}}
                )


def _off_target(residuals: Dict[str, Dict[str, Tuple[float, float, float]]]) -> Tuple[str, ...]:
    return tuple(
        f"{name} {per['efficiency'][0]:.4f} vs {per['efficiency'][1]:.4f}"
        for name, per in residuals.items()
        if abs(per["efficiency"][0] - per["efficiency"][1]) > EFFICIENCY_TOLERANCE
    )


def calibrate(
    noise_seed_guess: NoiseProfile,
    targets: Optional[Dict[str, CalibrationTargets]] = None,
    overlaps: Sequence[float] = CALIBRATION_OVERLAPS,
    shots: int = 4000,
    seed: int = 0,
    max_iterations: int = 60,
    weights: Optional[Dict[str, float]] = None,
    tolerance: float = 1e-4,
    workers: int = 1,
    fit: Sequence[str] = FIT_PARAMETERS,
    search_orders: bool = True,
) -> CalibrationReport:
    """Coordinate descent on the noise probabilities, with a readout-order search whenever it stalls.

    Converged means the loss reached `tolerance`, or the steps shrank to nothing
    with every efficiency within EFFICIENCY_TOLERANCE of its target. Anything
    else returns the best profile seen together with a warning.
    """
    targets = targets or table1_targets()
    weights = {**DEFAULT_WEIGHTS, **(weights or {})}
    unknown = [name for name in fit if name not in _INITIAL_STEPS]
    if unknown:
        raise ValueError(f"cannot fit {unknown}; choose from {tuple(_INITIAL_STEPS)}")
    protocols = tuple(name for name in PROTOCOL_ORDER if name in targets)
    evaluations = 0

    def evaluate(profile: NoiseProfile):
        nonlocal evaluations
        evaluations += 1
        res = _residuals(simulate_metrics(profile, overlaps, shots, seed, workers, protocols), targets)
        return _loss(res, weights), res

    current = noise_seed_guess
    best_loss, best_res = evaluate(current)
    steps = {name: _INITIAL_STEPS[name] for name in fit}
    converged = best_loss <= tolerance
    stalled = False
    iterations = 0

    while not converged and not stalled and iterations < max_iterations:
        iterations += 1
        improved = False
        for name in steps:
            for direction in (1.0, -1.0):
                candidate = _moved(current, name, direction * steps[name])
                if candidate is None:
                    continue
                loss, res = evaluate(candidate)
                if loss < best_loss:
                    current, best_loss, best_res = candidate, loss, res
                    improved = True
                    logger.debug("iteration %d: %s -> %.6f, loss %.6g", iterations, name, getattr(current, name), loss)
                    break
        if not improved and search_orders:
            for candidate in list(_reordered(current, protocols)):
                loss, res = evaluate(candidate)
                if loss < best_loss:
                    current, best_loss, best_res = candidate, loss, res
                    improved = True
            if improved:
                logger.debug("iteration %d: readout order -> %s, loss %.6g", iterations, current.readout_order, best_loss)
        if best_loss <= tolerance:
            converged = True
        elif not improved:
            steps = {k: v / 2.0 for k, v in steps.items()}
            stalled = all(steps[k] < _INITIAL_STEPS[k] * _MIN_STEP_FRACTION for k in steps)

    off_target = _off_target(best_res)
    warning = None
    if stalled and not converged:
        converged = not off_target
        if off_target:
            warning = (
                f"calibration stalled without converging: efficiency off target for "
                f"{', '.join(off_target)} (loss {best_loss:.6g})"
            )
    elif not converged:
        warning = f"calibration stopped after {iterations} iterations without converging (loss {best_loss:.6g})"
    if warning:
        logger.warning(warning)
    return CalibrationReport(
        profile=current,
        loss=best_loss,
        converged=converged,
        iterations=iterations,
        evaluations=evaluations,
        residuals=best_res,
        off_target=off_target,
        warning=warning,
    )


def save_calibration(report: CalibrationReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_calibration(path: Path) -> NoiseProfile:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no calibration at {path}; run `qsd calibrate` first")
    data = json.loads(path.read_text(encoding="utf-8"))
    return NoiseProfile.model_validate(data.get("profile", data))
