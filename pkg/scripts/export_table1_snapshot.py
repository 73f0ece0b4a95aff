#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
from pathlib import Path

from qsd.ledger import ledger_path, load_runs


def load_latest_table1(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(f"No run history found at {path}")
    runs = load_runs(path, limit=1, command="table1")
    if not runs:
        raise RuntimeError(f"Run history has no table1 runs: {path}")
    return runs[0]


def to_markdown(run: dict) -> str:
    report = run.get("summary", {})
    checks = report.get("figureChecks", {})

    lines = [
        "# Table 1 snapshot",
        "",
        f"- **Run Timestamp:** {run.get('runTs', 'n/a')}",
        f"- **Noise:** {report.get('noise', 'n/a')}",
        f"- **Shots per point:** {report.get('shots', 0)}",
        f"- **Seed:** {report.get('seed', 'n/a')}",
        f"- **Grid points:** {report.get('gridPoints', 0)}",
        "",
        "| Protocol | d | Unambiguous | Efficiency % (sim / printed) | Error % (sim / printed) | Multi-positive % (sim / printed) |",
        "|---|---:|---|---:|---:|---:|",
    ]
    for e in report.get("entries", []):
        lines.append(
            f"| {e.get('protocol')} | {e.get('dimension')} | {e.get('unambiguous')} "
            f"| {e.get('simulatedEfficiencyPct', 0):.1f} / {e.get('printedEfficiencyPct', 0):.1f} "
            f"| {e.get('simulatedErrorPct', 0):.2f} / {e.get('printedErrorPct', 'n/a')} "
            f"| {e.get('simulatedMultipositivePct', 0):.1f} / {e.get('printedMultipositivePct', 0):.1f} |"
        )

    lines += [
        "",
        "## Ordering checks",
        "",
        f"- helstrom >= idp >= susd in p_corr: {checks.get('corrOrdering')}",
        f"- idp <= susd in p_inconclusive: {checks.get('inconclusiveOrdering')}",
        f"- idp > susd in p_err near overlap 1: {checks.get('errorOrderingNearOne')}",
    ]
    for detail in checks.get("details", []):
        lines.append(f"  - {detail}")
    lines.append("")
    return "\n".join(lines)


def main() -> int:
    ap = argparse.ArgumentParser(description="Export the latest table1 run as JSON + markdown")
    ap.add_argument("--ledger", default=None, help="defaults to $QSD_RUNS_DIR/qsd_runs.jsonl")
    ap.add_argument("--out-dir", default="reports/table1_snapshots")
    args = ap.parse_args()

    run = load_latest_table1(Path(args.ledger) if args.ledger else ledger_path())

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ts = (run.get("runTs") or "latest").replace(":", "").replace("-", "")
    json_path = out_dir / f"table1_{ts}_snapshot.json"
    md_path = out_dir / f"table1_{ts}_snapshot.md"

    json_path.write_text(json.dumps(run, ensure_ascii=False, indent=2), encoding="utf-8")
    md_path.write_text(to_markdown(run), encoding="utf-8")

    print(json.dumps({"json": str(json_path), "markdown": str(md_path)}, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
