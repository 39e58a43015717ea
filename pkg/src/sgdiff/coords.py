"""Gaussian diffusion over node coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import coord_forward, coord_loss as _coord_loss
from .schedule import DiffusionSchedule


def forward_noise_coords(x0: np.ndarray, t: int, eps: np.ndarray, sched: DiffusionSchedule) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    sched.check_step(t)
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def reverse_step_coords(xt: np.ndarray, t: int, eps_hat: np.ndarray, noise: np.ndarray,
                        sched: DiffusionSchedule) -> np.ndarray:
    """One ancestral step ``X^t -> X^{t-1}``; the noise term is dropped at ``t = 1``."""
    sched.check_step(t)
    a, ab = sched.alpha[t], sched.alpha_bar[t]
    if ab >= 1.0:
        raise ZeroDivisionError(f"alpha_bar at step {t} is 1; the noise coefficient is undefined")
    sigma = np.sqrt(1.0 - a) if t > 1 else 0.0
    return (xt - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a) + sigma * noise


def coord_loss(theta, x0: np.ndarray, t: int, eps: np.ndarray, sched: DiffusionSchedule) -> float:
    """Noise-prediction MSE for a single point cloud."""
    loss = _coord_loss(theta, np.asarray(x0)[None], np.array([t]), np.asarray(eps)[None], sched.steps, sched.alpha_bar)
    return float(loss.data)


def sample_coords(theta, n: int, sched: DiffusionSchedule, rng: np.random.Generator) -> np.ndarray:
    """Run the full reverse chain for an ``n``-point cloud from standard normal."""
    x = rng.standard_normal((1, n, 3))
    for t in range(sched.steps, 0, -1):
        eps_hat = coord_forward(theta, x, t, sched.steps).data
        noise = rng.standard_normal(x.shape)
        x = reverse_step_coords(x, t, eps_hat, noise, sched)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(
                f"non-finite coordinates at step {t} (max |eps_hat| = {np.nanmax(np.abs(eps_hat)):.3g})")
    return x[0]


@dataclass(frozen=True)
class Normalizer:
    """Per-graph centring plus one corpus-wide scale."""

    offset: np.ndarray
    scale: float

    @classmethod
    def fit(cls, clouds, quantile: float = 0.99) -> "Normalizer":
        centered = [c - c.mean(0) for c in clouds]
        radii = np.concatenate([np.linalg.norm(c, axis=1) for c in centered])
        scale = float(np.quantile(radii, quantile)) or 1.0
        offset = np.mean([c.mean(0) for c in clouds], axis=0)
        return cls(np.asarray(offset, dtype=np.float64), scale)

    def apply(self, coords: np.ndarray) -> np.ndarray:
        return (coords - coords.mean(0)) / self.scale

    def invert(self, coords: np.ndarray) -> np.ndarray:
        return coords * self.scale + self.offset

    def to_json(self) -> dict:
        return {"offset": self.offset.tolist(), "scale": self.scale}

    @classmethod
    def from_json(cls, obj: dict) -> "Normalizer":
        return cls(np.array(obj["offset"], dtype=np.float64), float(obj["scale"]))
