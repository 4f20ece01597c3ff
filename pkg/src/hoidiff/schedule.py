"""Noise schedules and per-frame, per-modality timestamp grids.

A timestamp grid is an integer array of shape (3, W): row 0 holds the human
timestamps, row 1 the object timestamps, row 2 the contact timestamps.
Observation masks share that layout with booleans.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidT, WidthMismatch

HUMAN, OBJECT, CONTACT = 0, 1, 2
MODALITIES = ("h", "o", "c")


@dataclass(frozen=True)
class NoiseSchedule:
    """DDPM tables. ``beta[t-1]`` is the variance added at step t (t = 1..T)."""

    kind: str
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self):
        return len(self.beta)

    @property
    def sqrt_ab(self):
        return np.sqrt(self.alpha_bar)

    @property
    def sqrt_1mab(self):
        return np.sqrt(1.0 - self.alpha_bar)


def make_schedule(kind="cosine", T=100) -> NoiseSchedule:
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InvalidT(f"T must be a positive integer, got {T!r}")
    if kind == "linear":
        beta = np.linspace(1e-4, 0.02, T)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(T + 1) / T
        f = np.cos((steps + s) / (1 + s) * np.pi / 2) ** 2
        ab = f / f[0]
        beta = np.clip(1.0 - ab[1:] / ab[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    alpha_bar = np.concatenate([[1.0], np.cumprod(alpha)])
    return NoiseSchedule(kind, beta, alpha, alpha_bar)


def step_quantum(W, T):
    return max(1, int(np.floor(T / W + 0.5)))


def ramp_grid(W, T, phase=0):
    """Timestamps rising from the head of a window to its tail.

    Entry i is ``floor((i + 1) * T / W) - phase * q`` clamped to [0, T], with
    ``q = max(1, round(T / W))``. With phase 0 the last entry equals T.
    """
    i = np.arange(W)
    raw = ((i + 1) * T) // W - phase * step_quantum(W, T)
    return np.clip(raw, 0, T).astype(np.int64)


def conveyor_ramp(W, T, K=0):
    """K clean context slots followed by a full ramp over the other W - K."""
    return np.concatenate([np.zeros(K, dtype=np.int64), ramp_grid(W - K, T, 0)])


def sample_training_grid(rng, W, T, ramp_mix=0.5, max_context=0):
    """Draw a (3, W) timestamp grid for one training window.

    With probability ``1 - ramp_mix`` every entry is iid uniform on {0..T}.
    Otherwise all three rows share one ramp with a random phase in
    ``[0, q)``; when ``max_context > 0`` a uniformly drawn number of leading
    frames in ``[0, max_context]`` is additionally clamped to 0, mimicking the
    context frames kept at the head of the conveyor.
    """
    if rng.random() >= ramp_mix:
        return rng.integers(0, T + 1, size=(3, W))
    phase = int(rng.integers(0, step_quantum(W, T)))
    k = int(rng.integers(0, min(max_context, W - 1) + 1)) if max_context > 0 else 0
    row = np.concatenate([np.zeros(k, dtype=np.int64), ramp_grid(W - k, T, phase)])
    return np.tile(row, (3, 1))


def apply_observation_mask(grid, mask):
    grid = np.asarray(grid)
    mask = np.asarray(mask, dtype=bool)
    if grid.shape != mask.shape:
        raise WidthMismatch(f"grid {grid.shape} and mask {mask.shape} differ")
    return np.where(mask, 0, grid)
