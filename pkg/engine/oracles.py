"""Brute-force grid searches that check the closed-form optima independently.

Grids are nested: resolution R samples the rotation angle at k*pi/R and the
relative phase at k*2pi/R, so doubling R never loses a grid point and the
minimum found can only go down.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List

import numpy as np

from engine.protocols import StatePair, UnsupportedConfiguration, perpendicular_states

MIN_RESOLUTION = 64
_SHARD_ROWS = 64


def _grid(resolution: int):
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"grid_resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    k = np.arange(resolution)
    return k * (math.pi / resolution), k * (2.0 * math.pi / resolution)


def _sharded_min(phi: np.ndarray, chi: np.ndarray, evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray], workers: int) -> float:
    shards: List[np.ndarray] = [phi[i : i + _SHARD_ROWS] for i in range(0, len(phi), _SHARD_ROWS)]

    def shard_min(rows: np.ndarray) -> float:
        p, c = np.meshgrid(rows, chi, indexing="ij")
        return float(np.min(evaluate(p, c)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            mins = list(pool.map(shard_min, shards))
    else:
        mins = [shard_min(rows) for rows in shards]
    return min(mins)


def oracle_min_error_search(pair: StatePair, grid_resolution: int = 512, workers: int = 1) -> float:
    """Minimum average error over all orthonormal two-outcome bases of the (m0, m-1) span.

    v_A = (cos phi, e^{i chi} sin phi), v_B = (-e^{-i chi} sin phi, cos phi).
    """
    phi, chi = _grid(grid_resolution)
    a, b = pair.states()
    a0, a1 = a.amplitudes[0], a.amplitudes[1]
    b0, b1 = b.amplitudes[0], b.amplitudes[1]
    pa, pb = pair.prior_a, pair.prior_b

    def evaluate(p: np.ndarray, c: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * c)
        va0, va1 = np.cos(p), phase * np.sin(p)
        vb0, vb1 = -np.conj(phase) * np.sin(p), np.cos(p)
        b_given_a = np.abs(np.conj(vb0) * a0 + np.conj(vb1) * a1) ** 2
        a_given_b = np.abs(np.conj(va0) * b0 + np.conj(va1) * b1) ** 2
        return pa * b_given_a + pb * a_given_b

    return _sharded_min(phi, chi, evaluate, workers)


def oracle_usd_failure_search(pair: StatePair, grid_resolution: int = 512, workers: int = 1) -> float:
    """Minimum inconclusive probability over unambiguous three-outcome orthonormal bases.

    The conclusive vector for a is swept over the plane orthogonal to |b>
    (spanned by |+1> and |b_perp>); the conclusive vector for b is then fixed
    as the direction orthogonal to both |a> and that vector, and the
    inconclusive vector completes the basis. Every grid point is feasible.
    """
    if not pair.equal_priors:
        raise UnsupportedConfiguration("unambiguous failure search is defined for equal priors only")
    phi, chi = _grid(grid_resolution)
    a, b = pair.states()
    av, bv = a.amplitudes, b.amplitudes
    _, b_perp = perpendicular_states(pair.theta)
    u1 = np.array([0.0, 0.0, 1.0], dtype=complex)
    u2 = b_perp.amplitudes

    def evaluate(p: np.ndarray, c: np.ndarray) -> np.ndarray:
        a_tilde = np.cos(p)[..., None] * u1 + (np.exp(1j * c) * np.sin(p))[..., None] * u2
        w = np.conj(np.cross(np.broadcast_to(av, a_tilde.shape), a_tilde))
        norm = np.linalg.norm(w, axis=-1, keepdims=True)
        # a_tilde parallel to a only happens when a is orthogonal to b; then |b> itself works.
        b_tilde = np.where(norm > 1e-12, w / np.maximum(norm, 1e-300), np.broadcast_to(bv, w.shape))
        a_given_a = np.abs(np.sum(np.conj(a_tilde) * av, axis=-1)) ** 2
        b_given_b = np.abs(np.sum(np.conj(b_tilde) * bv, axis=-1)) ** 2
        return 1.0 - 0.5 * a_given_a - 0.5 * b_given_b

    return _sharded_min(phi, chi, evaluate, workers)
