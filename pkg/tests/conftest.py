from __future__ import annotations

import math

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def isolated_runs_dir(tmp_path, monkeypatch):
    runs = tmp_path / "runs"
    monkeypatch.setenv("QSD_RUNS_DIR", str(runs))
    monkeypatch.delenv("QSD_WORKERS", raising=False)
    return runs


@pytest.fixture
def theta_grid():
    return np.linspace(0.0, math.pi / 4, 100)
