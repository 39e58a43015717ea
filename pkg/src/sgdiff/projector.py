"""Constrained reverse sampling of edges.

At every reverse step the posterior proposes new edges. Each proposal is
checked against the structural constraint (acyclicity) and the label
constraint; a label conflict gets up to ``k`` fresh label draws from the
same posterior before the edge is dropped. Because the forward process only
deletes edges, a graph that is valid at step ``t`` stays valid when edges are
only ever added under these checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .edges import TransitionModel, edge_state, prior_state, sample_posterior, state_to_graph
from .graph import GraphError, OmegaMatrix, SpatialGraph, UnionFind, check_omega, would_violate
from .networks import EdgeDenoiser, rbf_features
from .schedule import DiffusionSchedule
from .training import pad_coords, pad_states


@dataclass(frozen=True)
class ProjectorConfig:
    omega: OmegaMatrix | None = None
    structural: str | None = None  # None or "forest"
    k: int = 4

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("resample budget k must be non-negative")
        if self.structural not in (None, "forest"):
            raise ValueError(f"unknown structural constraint {self.structural!r}")

    @property
    def active(self) -> bool:
        return self.omega is not None or self.structural is not None

    def to_json(self) -> dict:
        return {"omega": self.omega.to_json() if self.omega else None, "structural": self.structural, "k": self.k}


@dataclass
class InterventionLog:
    candidates: int = 0
    accepted: int = 0
    fixed: int = 0
    rejected: int = 0
    rejected_structural: int = 0

    def merge(self, other: "InterventionLog") -> "InterventionLog":
        for f in ("candidates", "accepted", "fixed", "rejected", "rejected_structural"):
            setattr(self, f, getattr(self, f) + getattr(other, f))
        return self

    @property
    def rate(self) -> float:
        return (self.fixed + self.rejected) / self.candidates if self.candidates else 0.0

    @property
    def consistent(self) -> bool:
        return self.accepted + self.fixed + self.rejected == self.candidates

    def to_json(self) -> dict:
        return {"candidates": self.candidates, "accepted": self.accepted, "fixed": self.fixed,
                "rejected": self.rejected, "rejected_structural": self.rejected_structural,
                "intervention_rate": self.rate}


class ChainState:
    """Edge state plus the incremental structures the checks need."""

    def __init__(self, E: np.ndarray):
        self.E = E.copy()
        n = E.shape[0]
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self.uf = UnionFind(n)
        iu, ju = np.nonzero(np.triu(E, 1))
        for i, j in zip(iu.tolist(), ju.tolist()):
            self._link(i, j, int(E[i, j]))

    def _link(self, i: int, j: int, label: int) -> None:
        self.adj[i].append((j, label))
        self.adj[j].append((i, label))
        self.uf.union(i, j)

    def add(self, i: int, j: int, label: int) -> None:
        self.E[i, j] = self.E[j, i] = label
        self._link(i, j, label)


def _draw_edge_label(row: np.ndarray, rng: np.random.Generator) -> int:
    """Label from ``row`` restricted to the edge classes, renormalised."""
    cum = np.cumsum(row[1:])
    u = rng.random() * cum[-1]
    return 1 + min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def project_step(E_t, candidates: Sequence[tuple[int, int, int]], rows: dict, cfg: ProjectorConfig,
                 rng: np.random.Generator, state: ChainState | None = None) -> tuple[np.ndarray, InterventionLog]:
    """Insert the candidate edges that keep the graph valid.

    ``candidates`` are ``(i, j, label)`` proposals for currently empty pairs and
    ``rows[(i, j)]`` the posterior each was drawn from. With ``state`` given it
    is updated in place and its matrix returned.
    """
    if state is None:
        state = ChainState(np.asarray(E_t))
    log = InterventionLog()
    order = rng.permutation(len(candidates)) if len(candidates) > 1 else range(len(candidates))
    for idx in order:
        i, j, label = candidates[idx]
        if state.E[i, j] != 0:
            raise GraphError(f"candidate ({i}, {j}) is already an edge")
        log.candidates += 1
        if cfg.structural == "forest" and state.uf.connected(i, j):
            log.rejected += 1
            log.rejected_structural += 1
            continue
        if cfg.omega is None or not would_violate(None, i, j, label, cfg.omega, state.adj):
            state.add(i, j, label)
            log.accepted += 1
            continue
        row = rows[(i, j)]
        for _ in range(cfg.k):
            label = _draw_edge_label(row, rng)
            if not would_violate(None, i, j, label, cfg.omega, state.adj):
                state.add(i, j, label)
                log.fixed += 1
                break
        else:
            log.rejected += 1
    return state.E, log


@dataclass
class ChainResult:
    graph: SpatialGraph
    log: InterventionLog


@dataclass
class _Chain:
    n: int
    state: ChainState
    rng_edges: np.random.Generator
    rng_proj: np.random.Generator
    log: InterventionLog = field(default_factory=InterventionLog)


def run_chains(model: EdgeDenoiser, coords: Sequence[np.ndarray], init_states: Sequence[np.ndarray], t_start: int,
               tm: TransitionModel, sched: DiffusionSchedule, cfg: ProjectorConfig,
               rngs: Sequence[tuple[np.random.Generator, np.random.Generator]], verify: bool = False,
               chunk: int = 8) -> list[ChainResult]:
    """Run reverse chains ``t_start -> 0`` for several graphs.

    Chains are sorted by node count and evaluated ``chunk`` at a time in one
    batched forward pass. Each chain owns its random streams ``(edges,
    projector)``; results come back in input order.
    """
    if cfg.active and tm.kind != "absorbing":
        raise ValueError("constrained sampling needs the absorbing (edge-deletion) transition kind")
    # chunks of similar size waste less work on padding
    order = sorted(range(len(coords)), key=lambda i: (len(coords[i]), i))
    results: list[ChainResult | None] = [None] * len(coords)
    for lo in range(0, len(order), chunk):
        idx = order[lo:lo + chunk]
        out = _run_chunk(model, [coords[i] for i in idx], [init_states[i] for i in idx], t_start, tm, sched,
                         cfg, [rngs[i] for i in idx], verify)
        for i, r in zip(idx, out):
            results[i] = r
    return results


def _run_chunk(model, coords, init_states, t_start, tm, sched, cfg, rngs, verify):
    chains = [_Chain(len(c), ChainState(E), r[0], r[1]) for c, E, r in zip(coords, init_states, rngs)]
    xs, mask = pad_coords(coords)
    N = xs.shape[1]
    rbf = rbf_features(xs, model.config).astype(model.dtype)
    absorbing = tm.kind == "absorbing"
    for t in range(t_start, 0, -1):
        E = pad_states([ch.state.E for ch in chains], N)
        probs = model.probs(E, xs, t, sched.steps, mask, rbf)
        for b, ch in enumerate(chains):
            n = ch.n
            proposal, rows = sample_posterior(ch.state.E, probs[b, :n, :n].astype(np.float64), t, tm, sched, ch.rng_edges)
            if not absorbing:
                # unconstrained by contract: only the matrix is used from here on
                ch.state.E = proposal
                continue
            iu, ju = np.triu_indices(n, 1)
            new = np.nonzero((ch.state.E[iu, ju] == 0) & (proposal[iu, ju] > 0))[0]
            cands = [(int(iu[p]), int(ju[p]), int(proposal[iu[p], ju[p]])) for p in new]
            rowmap = {(c[0], c[1]): rows[p] for c, p in zip(cands, new)}
            # fresh generator per step
            step_rng = np.random.default_rng(ch.rng_proj.integers(2**63))
            _, delta = project_step(ch.state.E, cands, rowmap, cfg, step_rng, ch.state)
            ch.log.merge(delta)
            if verify and cfg.active:
                g = state_to_graph(coords[b], ch.state.E)
                if check_omega(g, cfg.omega, cfg.structural):
                    raise AssertionError(f"constraint broken at step {t}")
    return [ChainResult(state_to_graph(c, ch.state.E), ch.log) for c, ch in zip(coords, chains)]


def reverse_sample(model: EdgeDenoiser, coords: np.ndarray, tm: TransitionModel, sched: DiffusionSchedule,
                   cfg: ProjectorConfig, rng: np.random.Generator) -> tuple[SpatialGraph, InterventionLog]:
    """Sample an edge set for fixed node positions, starting from the limit distribution."""
    rng_edges, rng_proj = rng.spawn(2)
    E_T = prior_state(len(coords), tm, rng_edges)
    res = run_chains(model, [coords], [E_T], sched.steps, tm, sched, cfg, [(rng_edges, rng_proj)])[0]
    return res.graph, res.log


def sample_graphs(model: EdgeDenoiser, coords: Sequence[np.ndarray], tm: TransitionModel, sched: DiffusionSchedule,
                  cfg: ProjectorConfig, rngs: Sequence[tuple[np.random.Generator, np.random.Generator]],
                  chunk: int = 8, verify: bool = False) -> list[ChainResult]:
    init = [prior_state(len(c), tm, r[0]) for c, r in zip(coords, rngs)]
    return run_chains(model, coords, init, sched.steps, tm, sched, cfg, rngs, verify, chunk)


def link_predict(model: EdgeDenoiser, partial: SpatialGraph, tm: TransitionModel, sched: DiffusionSchedule,
                 cfg: ProjectorConfig, steps: int, rng: np.random.Generator, coords: np.ndarray | None = None) -> SpatialGraph:
    """Complete ``partial`` by running the last ``steps`` reverse steps from its edge set.

    ``coords`` overrides the node positions fed to the denoiser (e.g. normalised ones).
    """
    rng_edges, rng_proj = rng.spawn(2)
    return link_predict_many(model, [partial], tm, sched, cfg, steps, [(rng_edges, rng_proj)],
                             None if coords is None else [coords])[0]


def link_predict_many(model, partials: Sequence[SpatialGraph], tm, sched, cfg: ProjectorConfig, steps: int,
                      rngs, coords: Sequence[np.ndarray] | None = None, chunk: int = 8) -> list[SpatialGraph]:
    if tm.kind != "absorbing":
        raise ValueError("link prediction needs the absorbing transition kind")
    if not 1 <= steps <= sched.steps:
        raise ValueError(f"steps must lie in 1..{sched.steps}")
    for g in partials:
        report = check_omega(g, cfg.omega, cfg.structural)
        if report:
            raise GraphError("input graph violates the constraints: " + "; ".join(report.lines()[:5]))
    xs = [g.coords for g in partials] if coords is None else list(coords)
    res = run_chains(model, xs, [edge_state(g) for g in partials], steps, tm, sched, cfg, rngs, chunk=chunk)
    return [SpatialGraph(g.coords, r.graph.edges, dict(g.meta)) for g, r in zip(partials, res)]
