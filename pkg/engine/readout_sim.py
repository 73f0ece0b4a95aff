"""Monte Carlo model of the experiment: preparation, pulses, sequential level readout.

Each trial prepares a or b, applies the schedule (or nothing, if initialization
failed), collapses the post-pulse state once into a definite level, possibly
moves it to another read level (pulse error), then probes the levels in the
protocol's readout order. Probes fire with occupancy-dependent
probabilities and the spin may hop to an adjacent level after each probe. The
first level that fired decides the outcome; no positive at all is NoResult.

Trials are simulated in fixed blocks of BLOCK_SIZE. Block k draws from
Philox(SeedSequence([seed, k])), so counts do not depend on how blocks are
spread over workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from engine.protocols import OUTCOME_ORDER, IdealStats, Protocol, StatePair
from engine.pulse_compiler import PulseSchedule, compile_preparation, compile_protocol, schedule_unitary
from engine.qudit_core import LEVEL_INDEX, LEVELS
from engine.registry import PROTOCOL_REGISTRY, family_of

logger = logging.getLogger(__name__)

BLOCK_SIZE = 8192
NO_RESULT = "NoResult"

_CODE_A, _CODE_B, _CODE_INCONCLUSIVE, _CODE_UNUSED = range(4)
_CODE_NO_RESULT = 4

# m0 neighbours both m-1 and m+1; m-1 and m+1 are two quanta apart.
_ADJACENT = np.array(
    [
        [False, True, True],
        [True, False, False],
        [True, False, False],
    ]
)

DEFAULT_READOUT_ORDER: Dict[str, Tuple[str, ...]] = {
    name: spec.readout_order for name, spec in PROTOCOL_REGISTRY.items()
}


class NoiseProfile(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    p_init_fail: float = Field(0.0, ge=0.0, le=1.0, alias="pInitFail")
    p_true_positive: float = Field(1.0, ge=0.0, le=1.0, alias="pTruePositive")
    p_false_positive_neighbor: float = Field(0.0, ge=0.0, le=1.0, alias="pFalsePositiveNeighbor")
    p_false_positive_far: float = Field(0.0, ge=0.0, le=1.0, alias="pFalsePositiveFar")
    p_flip_per_probe: float = Field(0.0, ge=0.0, le=1.0, alias="pFlipPerProbe")
    # the pulses leave the spin on a wrong readout level (pulse infidelity, relaxation before readout)
    p_pulse_error: float = Field(0.0, ge=0.0, le=1.0, alias="pPulseError")
    readout_order: Dict[str, Tuple[str, ...]] = Field(
        default_factory=lambda: dict(DEFAULT_READOUT_ORDER), alias="readoutOrder"
    )

    @field_validator("readout_order")
    @classmethod
    def _check_order(cls, value: Dict[str, Tuple[str, ...]]) -> Dict[str, Tuple[str, ...]]:
        merged = dict(DEFAULT_READOUT_ORDER)
        for name, levels in value.items():
            if name not in PROTOCOL_REGISTRY:
                raise ValueError(f"readout order given for unknown protocol {name!r}")
            levels = tuple(levels)
            if not levels or len(set(levels)) != len(levels) or any(lvl not in LEVEL_INDEX for lvl in levels):
                raise ValueError(f"readout order for {name} must list distinct levels from {LEVELS}, got {levels}")
            merged[name] = levels
        return merged

    @model_validator(mode="after")
    def _check_ordering(self) -> "NoiseProfile":
        if not self.p_false_positive_far <= self.p_false_positive_neighbor <= self.p_true_positive:
            raise ValueError(
                "need p_false_positive_far <= p_false_positive_neighbor <= p_true_positive, got "
                f"{self.p_false_positive_far}, {self.p_false_positive_neighbor}, {self.p_true_positive}"
            )
        return self

    @classmethod
    def zero(cls) -> "NoiseProfile":
        return cls()

    @classmethod
    def default_guess(cls) -> "NoiseProfile":
        """Starting point for calibration, not a fitted profile."""
        return cls(
            p_init_fail=0.06,
            p_true_positive=0.92,
            p_false_positive_neighbor=0.03,
            p_false_positive_far=0.003,
            p_flip_per_probe=0.02,
            p_pulse_error=0.02,
        )

    def fire_matrix(self) -> np.ndarray:
        """fire[occupied, probed] = probability that probing `probed` gives a positive."""
        m = np.where(_ADJACENT, self.p_false_positive_neighbor, self.p_false_positive_far)
        np.fill_diagonal(m, self.p_true_positive)
        return m


@dataclass(frozen=True)
class TrialRecord:
    prepared: str
    raw_positives: Tuple[str, ...]
    assigned: str
    positive_count: int


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    mode: str
    theta: float
    overlap: float
    shots: int
    p_corr: float
    p_err: float
    p_inconclusive: float
    p_noresult: float
    p_multipositive: float
    efficiency: float
    stderr_corr: float = 0.0
    stderr_err: float = 0.0
    stderr_inconclusive: float = 0.0
    p_corr_given_result: float = 0.0
    p_err_given_result: float = 0.0
    p_inconclusive_given_result: float = 0.0


@dataclass(frozen=True, eq=False)
class _Plan:
    weights_cum: np.ndarray
    # level_probs[pipeline, prepared (0=a, 1=b), level]
    level_probs: np.ndarray
    label_codes: np.ndarray
    order: np.ndarray
    fire: np.ndarray
    p_flip: float
    p_init_fail: float
    p_pulse_error: float
    # position of each level in the readout order, len(order) if the level is never read
    order_position: np.ndarray
    prior_a: float


def _stderr(p: float, n: int) -> float:
    return math.sqrt(max(0.0, p * (1.0 - p)) / n) if n > 0 else 0.0


def _given_result(p: float, efficiency: float) -> float:
    return p / efficiency if efficiency > 0 else 0.0


def _as_schedules(
    protocol: Protocol, schedules: Union[None, PulseSchedule, Sequence[PulseSchedule]], pair: StatePair
) -> Tuple[PulseSchedule, ...]:
    if schedules is None:
        return compile_protocol(protocol, pair)
    if isinstance(schedules, PulseSchedule):
        return (schedules,)
    return tuple(schedules)


def _check_consistent(protocol: Protocol, schedules: Tuple[PulseSchedule, ...]) -> List[np.ndarray]:
    if len(schedules) != len(protocol.pipelines):
        raise ValueError(f"{protocol.kind.value} has {len(protocol.pipelines)} pipelines but {len(schedules)} schedules")
    unitaries = []
    for pipeline, schedule in zip(protocol.pipelines, schedules):
        u = schedule_unitary(schedule).entries
        # equal up to a global phase
        overlap = np.abs(np.sum(u.conj() * pipeline.unitary.entries)) / 3.0
        if abs(overlap - 1.0) > 1e-8:
            raise ValueError(f"schedule does not realize the {protocol.kind.value} pipeline (overlap {overlap:.6f})")
        unitaries.append(u)
    return unitaries


def _order_position(order: Sequence[str]) -> np.ndarray:
    position = np.full(len(LEVELS), len(order), dtype=np.int64)
    for j, lvl in enumerate(order):
        position[LEVEL_INDEX[lvl]] = j
    return position


def _plan(protocol: Protocol, schedules, pair: StatePair, noise: NoiseProfile) -> _Plan:
    schedules = _as_schedules(protocol, schedules, pair)
    unitaries = _check_consistent(protocol, schedules)
    prepared = []
    for which in ("a", "b"):
        prep = schedule_unitary(compile_preparation(pair.theta, which)).entries
        prepared.append(prep[:, 0])
    probs = np.empty((len(unitaries), 2, 3))
    for k, u in enumerate(unitaries):
        for s, psi in enumerate(prepared):
            p = np.abs(u @ psi) ** 2
            probs[k, s] = p / p.sum()
    order = noise.readout_order[family_of(protocol.kind)]
    return _Plan(
        weights_cum=np.cumsum([p.weight for p in protocol.pipelines]),
        level_probs=probs,
        label_codes=np.array([p.label_codes() for p in protocol.pipelines]),
        order=np.array([LEVEL_INDEX[lvl] for lvl in order], dtype=np.int64),
        fire=noise.fire_matrix(),
        p_flip=noise.p_flip_per_probe,
        p_init_fail=noise.p_init_fail,
        p_pulse_error=noise.p_pulse_error,
        order_position=_order_position(order),
        prior_a=pair.prior_a,
    )


def _simulate(plan: _Plan, n: int, rng: np.random.Generator, prepared: Optional[str] = None):
    """Vectorized trials. Returns (is_b, fired[n, probes], assigned codes)."""
    branch = np.searchsorted(plan.weights_cum, rng.random(n), side="right")
    branch = np.minimum(branch, len(plan.weights_cum) - 1)
    is_b = rng.random(n) >= plan.prior_a
    if prepared is not None:
        is_b = np.full(n, prepared == "b")
    init_fail = rng.random(n) < plan.p_init_fail

    cum = np.cumsum(plan.level_probs[branch, is_b.astype(np.int64)], axis=1)
    level = np.sum(rng.random(n)[:, None] >= cum[:, :-1], axis=1)
    level = np.where(init_fail, LEVEL_INDEX["m0"], level)

    # a pulse error moves the spin to one of the other read levels, chosen uniformly
    k = len(plan.order)
    position = plan.order_position[level]
    others = np.where(position < k, k - 1, k)
    misrouted = (rng.random(n) < plan.p_pulse_error) & ~init_fail & (others > 0)
    pick = np.minimum((rng.random(n) * others).astype(np.int64), np.maximum(others - 1, 0))
    pick = np.where(pick >= position, pick + 1, pick)
    level = np.where(misrouted, plan.order[np.minimum(pick, k - 1)], level)

    fired = np.zeros((n, len(plan.order)), dtype=bool)
    for j, probed in enumerate(plan.order):
        fired[:, j] = rng.random(n) < plan.fire[level, probed]
        hop = rng.random(n) < plan.p_flip
        up = rng.random(n) < 0.5
        target = np.where(level == 0, np.where(up, LEVEL_INDEX["m+1"], LEVEL_INDEX["m-1"]), LEVEL_INDEX["m0"])
        level = np.where(hop, target, level)

    first_level = plan.order[np.argmax(fired, axis=1)]
    assigned = np.where(fired.any(axis=1), plan.label_codes[branch, first_level], _CODE_NO_RESULT)
    return is_b, fired, assigned


def _tally(is_b: np.ndarray, fired: np.ndarray, assigned: np.ndarray) -> np.ndarray:
    """[correct, error, inconclusive, noresult, multipositive]"""
    is_a = ~is_b
    correct = ((assigned == _CODE_A) & is_a) | ((assigned == _CODE_B) & is_b)
    error = ((assigned == _CODE_B) & is_a) | ((assigned == _CODE_A) & is_b)
    # a positive on a level the protocol leaves unused is a result without a verdict
    inconclusive = (assigned == _CODE_INCONCLUSIVE) | (assigned == _CODE_UNUSED)
    noresult = assigned == _CODE_NO_RESULT
    multi = fired.sum(axis=1) >= 2
    return np.array([correct.sum(), error.sum(), inconclusive.sum(), noresult.sum(), multi.sum()], dtype=np.int64)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def run_trial(
    protocol: Protocol,
    schedule: Union[None, PulseSchedule, Sequence[PulseSchedule]],
    prepared: str,
    noise: NoiseProfile,
    rng_stream: np.random.Generator,
    pair: Optional[StatePair] = None,
) -> TrialRecord:
    if prepared not in ("a", "b"):
        raise ValueError(f"prepared must be 'a' or 'b', got {prepared!r}")
    pair = pair or StatePair(protocol.theta)
    plan = _plan(protocol, schedule, pair, noise)
    _, fired, assigned = _simulate(plan, 1, rng_stream, prepared)
    positives = tuple(LEVELS[plan.order[j]] for j in np.flatnonzero(fired[0]))
    code = int(assigned[0])
    label = NO_RESULT if code == _CODE_NO_RESULT else OUTCOME_ORDER[code].value
    return TrialRecord(prepared=prepared, raw_positives=positives, assigned=label, positive_count=len(positives))


def run_batch(
    protocol: Protocol,
    schedule: Union[None, PulseSchedule, Sequence[PulseSchedule]],
    pair: StatePair,
    noise: NoiseProfile,
    shots: int,
    seed: int,
    workers: int = 1,
) -> SweepRow:
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    plan = _plan(protocol, schedule, pair, noise)
    blocks = [(k, min(BLOCK_SIZE, shots - k * BLOCK_SIZE)) for k in range(math.ceil(shots / BLOCK_SIZE))]

    def run_block(block: Tuple[int, int]) -> np.ndarray:
        index, size = block
        return _tally(*_simulate(plan, size, block_rng(seed, index)))

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(run_block, blocks))
    else:
        counts = sum(run_block(b) for b in blocks)

    correct, error, inconclusive, noresult, multi = (int(c) for c in counts)
    p_corr, p_err, p_inc = correct / shots, error / shots, inconclusive / shots
    # efficiency and p_noresult both come from the same integer count
    efficiency = (shots - noresult) / shots
    logger.debug("%s theta=%.6f shots=%d counts=%s", protocol.kind.value, pair.theta, shots, counts.tolist())
    return SweepRow(
        protocol=family_of(protocol.kind),
        mode="montecarlo",
        theta=pair.theta,
        overlap=pair.overlap,
        shots=shots,
        p_corr=p_corr,
        p_err=p_err,
        p_inconclusive=p_inc,
        p_noresult=noresult / shots,
        p_multipositive=multi / shots,
        efficiency=efficiency,
        stderr_corr=_stderr(p_corr, shots),
        stderr_err=_stderr(p_err, shots),
        stderr_inconclusive=_stderr(p_inc, shots),
        p_corr_given_result=_given_result(p_corr, efficiency),
        p_err_given_result=_given_result(p_err, efficiency),
        p_inconclusive_given_result=_given_result(p_inc, efficiency),
    )


def ideal_row(protocol: Protocol, pair: StatePair, stats: IdealStats) -> SweepRow:
    """Exact Born-rule statistics in SweepRow form: shots=0, no statistical error."""
    return SweepRow(
        protocol=family_of(protocol.kind),
        mode="ideal",
        theta=pair.theta,
        overlap=pair.overlap,
        shots=0,
        p_corr=stats.p_corr,
        p_err=stats.p_err,
        p_inconclusive=stats.p_inconclusive,
        p_noresult=0.0,
        p_multipositive=0.0,
        efficiency=1.0,
        p_corr_given_result=stats.p_corr,
        p_err_given_result=stats.p_err,
        p_inconclusive_given_result=stats.p_inconclusive,
    )


def rows_agree(row: SweepRow, stats: IdealStats, sigmas: float = 4.0) -> bool:
    """Monte Carlo rates within `sigmas` binomial standard errors of the ideal ones."""
    for simulated, exact in ((row.p_corr, stats.p_corr), (row.p_err, stats.p_err), (row.p_inconclusive, stats.p_inconclusive)):
        if abs(simulated - exact) > sigmas * _stderr(exact, row.shots) + 1e-9:
            return False
    return True


def cell_seed(seed: int, protocol_ordinal: int, grid_index: int) -> int:
    """Independent seed for one (protocol, grid point) cell of a sweep."""
    state = np.random.SeedSequence([int(seed), int(protocol_ordinal), int(grid_index)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))
