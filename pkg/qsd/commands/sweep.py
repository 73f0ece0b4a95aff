from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd

from engine.protocols import StatePair, build_protocol, ideal_stats
from engine.readout_sim import NoiseProfile, SweepRow, cell_seed, ideal_row, run_batch
from engine.registry import PROTOCOL_ORDER, get_spec
from qsd.config import resolve_noise
from qsd.contracts import CSV_COLUMNS, RunConfig

logger = logging.getLogger(__name__)


def run_sweep(config: RunConfig, noise: Optional[NoiseProfile] = None) -> List[SweepRow]:
    """One row per (protocol, theta, mode), sorted by protocol then theta, ideal before montecarlo."""
    if config.mode != "ideal" and noise is None:
        noise = resolve_noise(config)
    rows: List[SweepRow] = []
    for name in config.protocols:
        ordinal = PROTOCOL_ORDER.index(name)
        kind = get_spec(name).kind
        for index, theta in enumerate(config.thetas):
            pair = StatePair(theta)
            protocol = build_protocol(kind, pair)
            if config.mode in ("ideal", "both"):
                rows.append(ideal_row(protocol, pair, ideal_stats(protocol, pair)))
            if config.mode in ("montecarlo", "both"):
                seed = cell_seed(config.seed, ordinal, index)
                rows.append(run_batch(protocol, None, pair, noise, config.shots, seed, config.workers))
    rows.sort(key=lambda r: (r.protocol, r.theta, r.mode != "ideal"))
    logger.info("sweep produced %d rows", len(rows))
    return rows


def rows_frame(rows: List[SweepRow]) -> pd.DataFrame:
    records = [
        {
            "protocol": r.protocol,
            "mode": r.mode,
            "theta_rad": r.theta,
            "overlap": r.overlap,
            "shots": r.shots,
            "p_corr": r.p_corr,
            "p_err": r.p_err,
            "p_inconclusive": r.p_inconclusive,
            "p_noresult": r.p_noresult,
            "p_multipositive": r.p_multipositive,
            "efficiency": r.efficiency,
            "stderr_corr": r.stderr_corr,
            "stderr_err": r.stderr_err,
            "stderr_inconclusive": r.stderr_inconclusive,
        }
        for r in rows
    ]
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


# grid coordinates are written at round-trip precision, rates at 12 significant digits
EXACT_COLUMNS = ("theta_rad", "overlap")


def to_csv_text(rows: List[SweepRow]) -> str:
    frame = rows_frame(rows)
    for column in EXACT_COLUMNS:
        frame[column] = frame[column].map(lambda x: repr(float(x)))
    buf = io.StringIO()
    frame.to_csv(buf, index=False, float_format="%.12g", lineterminator="\n")
    return buf.getvalue()


def write_csv(rows: List[SweepRow], out: Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as f:
        f.write(to_csv_text(rows))
    return out


def summarize(rows: List[SweepRow]) -> dict:
    frame = rows_frame(rows)
    summary = {}
    for (protocol, mode), group in frame.groupby(["protocol", "mode"], sort=True):
        summary[f"{protocol}/{mode}"] = {
            "points": int(len(group)),
            "meanCorr": float(group["p_corr"].mean()),
            "meanErr": float(group["p_err"].mean()),
            "meanInconclusive": float(group["p_inconclusive"].mean()),
            "meanEfficiency": float(group["efficiency"].mean()),
        }
    return summary
