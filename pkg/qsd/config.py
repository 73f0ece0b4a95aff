from __future__ import annotations

import os
from pathlib import Path
from typing import Dict, Mapping, Optional

from pydantic import ValidationError

from engine.calibration import load_calibration
from engine.qudit_core import theta_from_overlap
from engine.readout_sim import NoiseProfile
from qsd.contracts import RunConfig
from qsd.ledger import runs_dir

NOISE_KEYS = (
    "p_init_fail",
    "p_true_positive",
    "p_false_positive_neighbor",
    "p_false_positive_far",
    "p_flip_per_probe",
    "p_pulse_error",
)
READOUT_KEYS = {
    "readout_order_susd": "susd",
    "readout_order_idp": "idp",
    "readout_order_helstrom": "helstrom",
}
KNOWN_KEYS = frozenset(
    (
        "protocols",
        "theta_grid",
        "overlap_grid",
        "shots",
        "mode",
        "noise",
        "seed",
        "out",
        "workers",
        "resolution",
        "calibration_shots",
        "calibration_path",
    )
    + NOISE_KEYS
    + tuple(READOUT_KEYS)
)


class ConfigError(ValueError):
    pass


def read_key_values(path: Path) -> Dict[str, str]:
    """Flat `key = value` file; blank lines and `#` comments are skipped, quotes stripped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: Dict[str, str] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8", errors="ignore").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected `key = value`, got {line!r}")
        k, v = line.split("=", 1)
        k = k.strip()
        v = v.strip().strip('"').strip("'")
        if k:
            values[k] = v
    return values


def _split(value: str) -> list:
    return [part.strip() for part in value.split(",") if part.strip()]


def _floats(key: str, value: str) -> list:
    try:
        return [float(x) for x in _split(value)]
    except ValueError:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {value!r}") from None


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def build_run_config(
    file_values: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Optional[str]]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge config sources (flags > file > QSD_WORKERS > defaults) and validate."""
    env = os.environ if env is None else env
    raw: Dict[str, str] = dict(file_values or {})
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    if "workers" not in raw and env.get("QSD_WORKERS"):
        raw["workers"] = env["QSD_WORKERS"]

    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "theta_grid" in raw and "overlap_grid" in raw:
        raise ConfigError("give either theta_grid or overlap_grid, not both")

    fields: Dict[str, object] = {}
    if "protocols" in raw:
        fields["protocols"] = tuple(p.lower() for p in _split(raw["protocols"]))
    if "theta_grid" in raw:
        fields["thetas"] = tuple(_floats("theta_grid", raw["theta_grid"]))
    if "overlap_grid" in raw:
        try:
            fields["thetas"] = tuple(theta_from_overlap(x) for x in _floats("overlap_grid", raw["overlap_grid"]))
        except ValueError as e:
            raise ConfigError(f"overlap_grid: {e}") from None
    for key in ("shots", "seed", "workers", "resolution", "calibration_shots"):
        if key in raw:
            fields[key] = _int(key, raw[key])
    for key in ("mode", "noise", "out", "calibration_path"):
        if key in raw:
            fields[key] = raw[key]
    explicit = {}
    for key in NOISE_KEYS:
        if key in raw:
            try:
                explicit[key] = float(raw[key])
            except ValueError:
                raise ConfigError(f"{key}: expected a probability, got {raw[key]!r}") from None
    if explicit:
        fields["noise_explicit"] = explicit
    orders = {name: tuple(_split(raw[key])) for key, name in READOUT_KEYS.items() if key in raw}
    if orders:
        fields["readout_order"] = orders

    try:
        config = RunConfig(**fields)
        # surface bad noise parameters as config errors too
        if config.noise != "calibrated":
            resolve_noise(config)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from None
    return config


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(x) for x in item.get("loc", ())) or "config"
        parts.append(f"{where}: {item.get('msg', 'invalid')}")
    return "; ".join(parts)


def calibration_file(config: RunConfig) -> Path:
    if config.calibration_path:
        return Path(config.calibration_path)
    return runs_dir() / "calibration.json"


def resolve_noise(config: RunConfig) -> NoiseProfile:
    if config.noise == "calibrated":
        try:
            base = load_calibration(calibration_file(config))
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from None
    elif config.noise == "default":
        base = NoiseProfile.default_guess()
    elif config.noise == "explicit":
        base = NoiseProfile(**config.noise_explicit)
    else:
        base = NoiseProfile.zero()
    if not config.readout_order:
        return base
    return NoiseProfile.model_validate(
        {**base.model_dump(), "readout_order": {**base.readout_order, **config.readout_order}}
    )


def load_config(path: Optional[str], overrides: Optional[Mapping[str, Optional[str]]] = None) -> RunConfig:
    file_values = read_key_values(Path(path)) if path else {}
    return build_run_config(file_values, overrides)

