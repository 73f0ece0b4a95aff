from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple

from engine.calibration import CalibrationReport, calibrate, save_calibration
from engine.readout_sim import NoiseProfile
from qsd.config import ConfigError, calibration_file, resolve_noise
from qsd.contracts import RunConfig

logger = logging.getLogger(__name__)


def starting_profile(config: RunConfig) -> NoiseProfile:
    # the noiseless profile sits on a corner of the box; start from the default guess instead
    if config.noise == "zero":
        return NoiseProfile.default_guess().model_copy(update={"readout_order": resolve_noise(config).readout_order})
    return resolve_noise(config)


def run_calibrate(config: RunConfig, max_iterations: int = 60) -> Tuple[CalibrationReport, Path]:
    if config.seed is None:
        raise ConfigError("calibrate needs a seed; pass --seed or set seed in the config")
    report = calibrate(
        starting_profile(config),
        shots=config.calibration_shots,
        seed=config.seed,
        max_iterations=max_iterations,
        workers=config.workers,
    )
    path = save_calibration(report, calibration_file(config))
    logger.info("calibration saved to %s (loss %.6g, converged=%s)", path, report.loss, report.converged)
    return report, path


def summary(report: CalibrationReport, path: Optional[Path] = None) -> dict:
    data = report.to_dict()
    if path is not None:
        data["path"] = str(path)
    return data
