from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional


def runs_dir() -> Path:
    return Path(os.getenv("QSD_RUNS_DIR", "runs"))


def ledger_path() -> Path:
    return runs_dir() / "qsd_runs.jsonl"


def run_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def persist_run(entry: dict, path: Optional[Path] = None) -> Path:
    path = Path(path) if path else ledger_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as f:
        f.write(json.dumps(entry, ensure_ascii=False) + "\n")
    return path


def load_runs(path: Optional[Path] = None, limit: int = 50, command: Optional[str] = None) -> list:
    """Newest first; malformed lines are skipped."""
    path = Path(path) if path else ledger_path()
    if not path.exists():
        return []
    rows = []
    for line in path.read_text(encoding="utf-8", errors="ignore").splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError:
            continue
        if not isinstance(row, dict):
            continue
        if command is None or row.get("command") == command:
            rows.append(row)
    rows.sort(key=lambda r: r.get("runTs", ""), reverse=True)
    return rows[:limit]
