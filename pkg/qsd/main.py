from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from engine.protocols import ThetaOutOfRange
from engine.qudit_core import theta_from_overlap
from qsd.commands.calibrate import run_calibrate, summary as calibration_summary
from qsd.commands.oracles import run_oracles
from qsd.commands.schedule import render_schedule
from qsd.commands.sweep import run_sweep, summarize, to_csv_text, write_csv
from qsd.commands.table1 import run_table1
from qsd.config import ConfigError, load_config
from qsd.contracts import RunConfig
from qsd.ledger import load_runs, persist_run, run_timestamp

logger = logging.getLogger("qsd")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--protocols", default=None, help="comma list of susd,idp,helstrom")
    parser.add_argument("--shots", default=None)
    parser.add_argument("--seed", default=None)
    parser.add_argument("--mode", default=None, choices=["ideal", "montecarlo", "both"])
    parser.add_argument("--noise", default=None, choices=["zero", "calibrated", "default", "explicit"])
    parser.add_argument("--workers", default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--log-level", default="WARNING")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsd", description="Two-state discrimination on a spin-1 system")
    sub = ap.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="ideal and/or Monte Carlo rates over a theta grid, as CSV")
    _common(sweep)

    table1 = sub.add_parser("table1", help="simulated efficiency/error table and figure ordering checks")
    _common(table1)

    oracles = sub.add_parser("oracles", help="brute-force optima against the closed forms")
    _common(oracles)
    oracles.add_argument("--resolution", default=None)

    calibrate = sub.add_parser("calibrate", help="fit the noise profile to the printed table values")
    _common(calibrate)
    calibrate.add_argument("--max-iterations", type=int, default=60)

    schedule = sub.add_parser("schedule", help="print the pulse schedule for one protocol")
    schedule.add_argument("--protocol", required=True, choices=["susd", "idp", "helstrom"])
    grid = schedule.add_mutually_exclusive_group(required=True)
    grid.add_argument("--theta", type=float)
    grid.add_argument("--overlap", type=float)
    schedule.add_argument("--basis", default=None, choices=["A_basis", "B_basis"])
    schedule.add_argument("--prior-a", type=float, default=0.5)
    schedule.add_argument("--log-level", default="WARNING")

    runs = sub.add_parser("runs", help="recent entries of the run ledger")
    runs.add_argument("--limit", type=int, default=10)
    runs.add_argument("--command-name", default=None)
    runs.add_argument("--log-level", default="WARNING")
    return ap


def _overrides(args: argparse.Namespace) -> Dict[str, Optional[str]]:
    keys = ("protocols", "shots", "seed", "mode", "noise", "workers", "out", "resolution")
    return {k: getattr(args, k, None) for k in keys}


def _config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, _overrides(args))


def _cmd_sweep(args: argparse.Namespace) -> Tuple[str, dict]:
    config = _config(args)
    rows = run_sweep(config)
    if config.out:
        path = write_csv(rows, config.out)
        text = json.dumps({"status": "success", "rows": len(rows), "out": str(path)}, indent=2) + "\n"
    else:
        text = to_csv_text(rows)
    return text, {"config": config.model_dump(by_alias=True), "seed": config.seed, "summary": summarize(rows)}


def _cmd_table1(args: argparse.Namespace) -> Tuple[str, dict]:
    config = _config(args)
    report = run_table1(config)
    payload = report.model_dump(by_alias=True)
    return json.dumps(payload, indent=2) + "\n", {"config": config.model_dump(by_alias=True), "seed": config.seed, "summary": payload}


def _cmd_oracles(args: argparse.Namespace) -> Tuple[str, dict]:
    config = _config(args)
    report = run_oracles(config)
    payload = report.model_dump(by_alias=True)
    summary = {k: payload[k] for k in ("resolution", "maxMinErrorDeviation", "maxUsdFailureDeviation")}
    return json.dumps(payload, indent=2) + "\n", {"config": config.model_dump(by_alias=True), "seed": config.seed, "summary": summary}


def _cmd_calibrate(args: argparse.Namespace) -> Tuple[str, dict]:
    config = _config(args)
    report, path = run_calibrate(config, max_iterations=args.max_iterations)
    payload = calibration_summary(report, path)
    return json.dumps(payload, indent=2) + "\n", {"config": config.model_dump(by_alias=True), "seed": config.seed, "summary": payload}


def _cmd_schedule(args: argparse.Namespace) -> Tuple[str, dict]:
    if args.theta is not None:
        theta = args.theta
    else:
        theta = theta_from_overlap(args.overlap)
    text = render_schedule(args.protocol, theta, args.basis, args.prior_a)
    return text, {"summary": {"protocol": args.protocol, "theta": theta}}


def _cmd_runs(args: argparse.Namespace) -> Tuple[str, dict]:
    runs = load_runs(limit=max(1, args.limit), command=args.command_name)
    return json.dumps({"status": "success", "count": len(runs), "runs": runs}, indent=2) + "\n", {}


COMMANDS: Dict[str, Callable[[argparse.Namespace], Tuple[str, dict]]] = {
    "sweep": _cmd_sweep,
    "table1": _cmd_table1,
    "oracles": _cmd_oracles,
    "calibrate": _cmd_calibrate,
    "schedule": _cmd_schedule,
    "runs": _cmd_runs,
}


def _fail(code: str, message: str, exit_code: int) -> int:
    print(json.dumps({"code": code, "message": message}), file=sys.stderr)
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="[qsd] %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    start = time.time()
    try:
        text, entry = COMMANDS[args.command](args)
    except (ConfigError, ValidationError, ThetaOutOfRange) as e:
        return _fail("invalid_config", str(e), EXIT_CONFIG)
    except ValueError as e:
        return _fail(f"{args.command}_failed", str(e), EXIT_RUNTIME)
    except OSError as e:
        return _fail("io_error", str(e), EXIT_RUNTIME)

    sys.stdout.write(text)
    sys.stdout.flush()
    elapsed_ms = int((time.time() - start) * 1000)
    if args.command != "runs":
        persist_run({"runTs": run_timestamp(), "command": args.command, "elapsedMs": elapsed_ms, **entry})
    logger.info("%s status=%d ms=%d", args.command, EXIT_OK, elapsed_ms)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
