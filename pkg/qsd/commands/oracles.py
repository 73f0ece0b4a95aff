from __future__ import annotations

import math

from engine.oracles import oracle_min_error_search, oracle_usd_failure_search
from engine.protocols import StatePair, helstrom_bound
from qsd.contracts import OraclePoint, OracleReport, RunConfig


def run_oracles(config: RunConfig) -> OracleReport:
    """Grid-search optima next to the closed forms, per theta of the configured grid."""
    points = []
    for theta in sorted(config.thetas):
        pair = StatePair(theta)
        points.append(
            OraclePoint(
                theta=theta,
                overlap=pair.overlap,
                min_error_oracle=oracle_min_error_search(pair, config.resolution, config.workers),
                min_error_closed_form=helstrom_bound(pair),
                usd_failure_oracle=oracle_usd_failure_search(pair, config.resolution, config.workers),
                usd_failure_closed_form=math.cos(2.0 * theta),
            )
        )
    return OracleReport(
        status="success",
        resolution=config.resolution,
        max_min_error_deviation=max(abs(p.min_error_oracle - p.min_error_closed_form) for p in points),
        max_usd_failure_deviation=max(abs(p.usd_failure_oracle - p.usd_failure_closed_form) for p in points),
        points=points,
    )
