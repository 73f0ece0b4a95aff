#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
from pathlib import Path

from qsd.config import read_key_values, build_run_config

EXAMPLE = """\
# qsd run configuration: flat `key = value` lines, flags on the command line win.
protocols = susd,idp,helstrom
overlap_grid = 0,0.125,0.25,0.375,0.5,0.625,0.75,0.875,1
mode = both
shots = 100000
seed = 42
noise = {noise}
workers = 1
resolution = 512
calibration_shots = 4000
# readout_order_idp = m-1,m+1,m0
"""

EXPLICIT = """\
p_init_fail = 0.06
p_true_positive = 0.92
p_false_positive_neighbor = 0.03
p_false_positive_far = 0.003
p_flip_per_probe = 0.02
p_pulse_error = 0.02
"""


def write_example(path: Path, noise: str = "zero") -> Path:
    text = EXAMPLE.format(noise=noise)
    if noise == "explicit":
        text += EXPLICIT
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def main() -> int:
    ap = argparse.ArgumentParser(description="Write an example qsd config file")
    ap.add_argument("--out", default="configs/example.conf")
    ap.add_argument("--noise", default="zero", choices=["zero", "default", "explicit", "calibrated"])
    args = ap.parse_args()

    path = write_example(Path(args.out), args.noise)
    # the example must parse; calibrated noise is only resolved when a run needs it
    config = build_run_config(read_key_values(path))
    print(json.dumps({"config": str(path), "protocols": list(config.protocols), "points": len(config.thetas)}, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
