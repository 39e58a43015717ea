"""Minibatch training with AdamW for both denoisers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autograd import grad
from .edges import TransitionModel, edge_state, forward_noise_edges
from .graph import SpatialGraph
from .networks import EdgeNetConfig, coord_loss, edge_ce, rbf_features
from .schedule import DiffusionSchedule

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 3e-4
    epochs: int = 200
    batch_size: int = 4
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    seed: int = 0


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-2):
        self.lr, self.beta1, self.beta2, self.eps, self.weight_decay = lr, beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            update = (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p -= self.lr * (update + self.weight_decay * p)


class TrainingDiverged(FloatingPointError):
    pass


def fit(params: dict[str, np.ndarray], dataset: Sequence, config: TrainConfig,
        loss_fn: Callable, progress: Callable[[int, float], None] | None = None) -> tuple[dict[str, np.ndarray], list[float]]:
    """Minimise ``loss_fn(param_tensors, batch, rng)`` over shuffled minibatches.

    ``params`` is updated in place and returned with the per-epoch mean loss.
    """
    if len(dataset) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    opt = AdamW(params, config.lr, config.beta1, config.beta2, config.eps, config.weight_decay)
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        total, batches = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [dataset[k] for k in order[start:start + config.batch_size]]
            value, grads = grad(params, lambda P: loss_fn(P, batch, rng))
            if not math.isfinite(value):
                raise TrainingDiverged(f"loss became {value} at epoch {epoch}, batch {batches}")
            if config.grad_clip is not None:
                norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                if norm > config.grad_clip:
                    grads = {k: g * (config.grad_clip / norm) for k, g in grads.items()}
            opt.step(params, grads)
            total += value
            batches += 1
        curve.append(total / batches)
        if progress is not None:
            progress(epoch, curve[-1])
        log.debug("epoch %d loss %.5f", epoch, curve[-1])
    return params, curve


# --- batching ------------------------------------------------------------------

def pad_coords(clouds: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    N = max(c.shape[0] for c in clouds)
    out = np.zeros((len(clouds), N, 3))
    mask = np.zeros((len(clouds), N), dtype=bool)
    for b, c in enumerate(clouds):
        out[b, :len(c)] = c
        mask[b, :len(c)] = True
    return out, mask


def pad_states(states: Sequence[np.ndarray], N: int) -> np.ndarray:
    out = np.zeros((len(states), N, N), dtype=np.int64)
    for b, E in enumerate(states):
        out[b, :E.shape[0], :E.shape[0]] = E
    return out


@dataclass(frozen=True)
class EdgeExample:
    coords: np.ndarray  # normalised
    state: np.ndarray


def edge_examples(graphs: Sequence[SpatialGraph], normalize: Callable[[np.ndarray], np.ndarray]) -> list[EdgeExample]:
    return [EdgeExample(normalize(g.coords), edge_state(g)) for g in graphs]


def edge_batch_loss(cfg: EdgeNetConfig, tm: TransitionModel, sched: DiffusionSchedule):
    """Loss closure: noise each graph at its own random step, then cross-entropy."""

    def loss(P, batch: list[EdgeExample], rng: np.random.Generator):
        coords, mask = pad_coords([ex.coords for ex in batch])
        N = coords.shape[1]
        ts = rng.integers(1, sched.steps + 1, size=len(batch))
        noised = [forward_noise_edges(ex.state, int(t), tm, sched, rng) for ex, t in zip(batch, ts)]
        e0 = pad_states([ex.state for ex in batch], N)
        et = pad_states(noised, N)
        return edge_ce(P, e0, et, coords, ts, sched.steps, cfg, mask, rbf_features(coords, cfg))

    return loss


def coord_batch_loss(sched: DiffusionSchedule):
    def loss(P, batch: list[np.ndarray], rng: np.random.Generator):
        x0, mask = pad_coords(batch)
        ts = rng.integers(1, sched.steps + 1, size=len(batch))
        eps = rng.standard_normal(x0.shape) * mask[..., None]
        return coord_loss(P, x0, ts, eps, sched.steps, sched.alpha_bar, mask)

    return loss
