"""Retention schedules shared by the coordinate and edge diffusion stages.

Arrays are indexed by step ``t = 0..T`` with ``alpha_bar[0] == alpha[0] == 1``
as a sentinel, so ``alpha_bar[t]`` reads the same as the math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_FLOOR = 1e-5


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int
    alpha: np.ndarray
    alpha_bar: np.ndarray
    kind: str = "linear"

    def __post_init__(self):
        for arr in (self.alpha, self.alpha_bar):
            arr.setflags(write=False)

    @property
    def T(self) -> int:
        return self.steps

    def check_step(self, t: int) -> None:
        if not 1 <= t <= self.steps:
            raise ValueError(f"step {t} outside 1..{self.steps}")


def _from_alpha_bar(values: np.ndarray, kind: str) -> DiffusionSchedule:
    T = len(values)
    ab = np.concatenate([[1.0], values])
    alpha = np.ones_like(ab)
    alpha[1:] = ab[1:] / ab[:-1]
    # running product of the per-step retentions
    return DiffusionSchedule(T, alpha, np.cumprod(alpha), kind)


def _floor(t: np.ndarray, T: int) -> np.ndarray:
    # Graded floor: equals EPS_FLOOR at t = T and keeps the sequence strictly
    # decreasing where the closed form underflows it.
    return EPS_FLOOR * (1.0 + (T - t))


def linear_schedule(T: int = 500) -> DiffusionSchedule:
    """``alpha_bar`` falls linearly from 1 to ``EPS_FLOOR``."""
    if T < 1:
        raise ValueError(f"need at least one step, got {T}")
    t = np.arange(1, T + 1, dtype=np.float64)
    ab = np.minimum(np.maximum(1.0 - t / T, _floor(t, T)), 1.0)
    return _from_alpha_bar(ab, "linear")


def cosine_schedule(T: int = 500) -> DiffusionSchedule:
    if T < 1:
        raise ValueError(f"need at least one step, got {T}")
    t = np.arange(1, T + 1, dtype=np.float64)
    ab = np.minimum(np.maximum(np.cos(t / T * math.pi / 2) ** 2, _floor(t, T)), 1.0)
    return _from_alpha_bar(ab, "cosine")


SCHEDULES = {"linear": linear_schedule, "cosine": cosine_schedule}


def make_schedule(kind: str, T: int) -> DiffusionSchedule:
    try:
        return SCHEDULES[kind](T)
    except KeyError:
        raise ValueError(f"unknown schedule {kind!r}; choose from {sorted(SCHEDULES)}") from None
