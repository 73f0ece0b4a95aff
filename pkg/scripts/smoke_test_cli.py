#!/usr/bin/env python3
from __future__ import annotations

import os
import subprocess
import sys
import tempfile
from pathlib import Path

SMOKE_CONFIG = """\
protocols = susd,idp,helstrom
overlap_grid = 0,0.5,1
mode = both
shots = 2000
seed = 7
noise = default
resolution = 64
"""


def run(args: list, env: dict) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "qsd", *args], capture_output=True, text=True, env=env)


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        config = Path(tmp) / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        env = {**os.environ, "QSD_RUNS_DIR": str(Path(tmp) / "runs")}

        tests = [
            ["sweep", "--config", str(config)],
            ["table1", "--config", str(config)],
            ["oracles", "--config", str(config)],
            ["schedule", "--protocol", "idp", "--overlap", "0.5"],
            ["runs", "--limit", "5"],
        ]
        for t in tests:
            result = run(t, env)
            if result.returncode != 0:
                print(f"FAIL {' '.join(t[:1])} exit={result.returncode} err={result.stderr.strip()}")
                return 1
            first = result.stdout.splitlines()[0] if result.stdout else ""
            print(f"PASS {t[0]} exit=0 first_line={first[:60]!r}")

        bad = run(["sweep", "--config", str(config), "--protocols", "bogus"], env)
        if bad.returncode != 2:
            print(f"FAIL config-error exit={bad.returncode} (expected 2)")
            return 1
        print("PASS config-error exit=2")

    print("SMOKE_TEST_PASS")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
