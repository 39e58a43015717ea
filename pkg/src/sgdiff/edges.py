"""Discrete diffusion over edge classes.

An edge state is a dense symmetric ``n x n`` integer matrix with zero diagonal:
entry ``[i, j]`` is the class of pair ``(i, j)``, 0 meaning no edge. Every
canonical pair (``i < j``) is noised independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import SpatialGraph
from .schedule import DiffusionSchedule

KINDS = ("absorbing", "uniform", "marginal")


@dataclass(frozen=True)
class TransitionModel:
    """Noising kernel family ``Q^t = alpha_t I + (1 - alpha_t) 1 m^T``.

    ``absorbing`` puts all of ``m`` on class 0 (edge deletion), ``uniform``
    spreads it evenly over all ``c`` classes, ``marginal`` uses class
    frequencies given in ``target``.
    """

    kind: str
    class_count: int
    target: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transition kind {self.kind!r}")
        c = self.class_count
        if c < 2:
            raise ValueError("need the no-edge class plus at least one edge class")
        if self.kind == "absorbing":
            m = np.zeros(c)
            m[0] = 1.0
        elif self.kind == "uniform":
            m = np.full(c, 1.0 / c)
        else:
            if self.target is None:
                raise ValueError("marginal kind needs class frequencies")
            m = np.asarray(self.target, dtype=np.float64)
            if m.shape != (c,) or np.any(m < 0) or not np.isclose(m.sum(), 1.0):
                raise ValueError("marginal target must be a length-c probability vector")
            m = m / m.sum()
        m.setflags(write=False)
        object.__setattr__(self, "target", m)

    @classmethod
    def marginal_from(cls, graphs: Sequence[SpatialGraph], class_count: int) -> "TransitionModel":
        counts = np.zeros(class_count)
        for g in graphs:
            n = g.node_count
            counts[0] += n * (n - 1) // 2 - g.edge_count
            for _, _, lab in g.edges:
                counts[lab] += 1
        return cls("marginal", class_count, counts / counts.sum())

    def to_json(self) -> dict:
        return {"kind": self.kind, "class_count": self.class_count, "target": self.target.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "TransitionModel":
        return cls(obj["kind"], int(obj["class_count"]), np.array(obj["target"]))


def _kernel(tm: TransitionModel, keep: float) -> np.ndarray:
    c = tm.class_count
    return keep * np.eye(c) + (1.0 - keep) * np.outer(np.ones(c), tm.target)


def transition_matrix(tm: TransitionModel, t: int, sched: DiffusionSchedule) -> np.ndarray:
    sched.check_step(t)
    return _kernel(tm, sched.alpha[t])


def cumulative_transition(tm: TransitionModel, t: int, sched: DiffusionSchedule) -> np.ndarray:
    """Closed form of ``Q^1 ... Q^t``; ``t = 0`` gives the identity."""
    if not 0 <= t <= sched.steps:
        raise ValueError(f"step {t} outside 0..{sched.steps}")
    return _kernel(tm, sched.alpha_bar[t])


# --- edge states -----------------------------------------------------------

def edge_state(g: SpatialGraph) -> np.ndarray:
    n = g.node_count
    E = np.zeros((n, n), dtype=np.int64)
    for i, j, lab in g.edges:
        E[i, j] = E[j, i] = lab
    return E


def state_to_graph(coords: np.ndarray, E: np.ndarray, meta: dict | None = None) -> SpatialGraph:
    iu, ju = np.nonzero(np.triu(E, 1))
    edges = tuple((int(i), int(j), int(E[i, j])) for i, j in zip(iu, ju))
    return SpatialGraph(coords, edges, dict(meta or {}))


def _sample_rows(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``rows`` (last axis = classes)."""
    cum = np.cumsum(rows, axis=-1)
    u = rng.random(rows.shape[:-1]) * cum[..., -1]
    return np.minimum((u[..., None] >= cum).sum(-1), rows.shape[-1] - 1)


def _resample_pairs(E: np.ndarray, Q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = E.shape[0]
    iu, ju = np.triu_indices(n, 1)
    new = _sample_rows(Q[E[iu, ju]], rng)
    out = np.zeros_like(E)
    out[iu, ju] = new
    out[ju, iu] = new
    return out


def forward_noise_edges(e0: np.ndarray, t: int, tm: TransitionModel, sched: DiffusionSchedule,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw ``E^t`` pairwise from the rows of the cumulative kernel."""
    return _resample_pairs(e0, cumulative_transition(tm, t, sched), rng)


def forward_step_edges(e_prev: np.ndarray, t: int, tm: TransitionModel, sched: DiffusionSchedule,
                       rng: np.random.Generator) -> np.ndarray:
    """A single step ``E^{t-1} -> E^t`` through ``Q^t``."""
    return _resample_pairs(e_prev, transition_matrix(tm, t, sched), rng)


def posterior(e_t, p0_hat: np.ndarray, t: int, tm: TransitionModel, sched: DiffusionSchedule) -> np.ndarray:
    """Reverse-step distribution over ``E^{t-1}`` given ``E^t`` and a predicted clean class.

    ``e_t`` is an integer (array) and ``p0_hat`` has a trailing class axis.
    Result rows are ``(Q^t[:, e_t] * (p0_hat Qbar^{t-1})) / (p0_hat Qbar^t[:, e_t])``.
    """
    Qt = transition_matrix(tm, t, sched)
    Qb_prev = cumulative_transition(tm, t - 1, sched)
    Qb = cumulative_transition(tm, t, sched)
    e_t = np.asarray(e_t)
    p0_hat = np.asarray(p0_hat, dtype=np.float64)
    num = Qt.T[e_t] * (p0_hat @ Qb_prev)
    den = np.einsum("...c,...c->...", p0_hat, Qb.T[e_t])
    if np.any(den <= 0):
        raise FloatingPointError(f"zero posterior normaliser at step {t}: state unreachable under the schedule")
    out = num / den[..., None]
    return out / out.sum(-1, keepdims=True)


def sample_posterior(E_t: np.ndarray, probs: np.ndarray, t: int, tm: TransitionModel, sched: DiffusionSchedule,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``E^{t-1}`` over canonical pairs.

    ``probs`` is the ``n x n x c`` predicted clean distribution. Returns the
    proposed state and the ``(pairs, c)`` posterior rows in ``triu_indices`` order.
    """
    n = E_t.shape[0]
    iu, ju = np.triu_indices(n, 1)
    rows = posterior(E_t[iu, ju], probs[iu, ju], t, tm, sched)
    new = _sample_rows(rows, rng)
    out = np.zeros_like(E_t)
    out[iu, ju] = new
    out[ju, iu] = new
    return out, rows


def prior_state(n: int, tm: TransitionModel, rng: np.random.Generator) -> np.ndarray:
    """``E^T`` drawn pairwise from the limit distribution ``m``."""
    iu, ju = np.triu_indices(n, 1)
    new = _sample_rows(np.broadcast_to(tm.target, (len(iu), tm.class_count)), rng)
    out = np.zeros((n, n), dtype=np.int64)
    out[iu, ju] = new
    out[ju, iu] = new
    return out
