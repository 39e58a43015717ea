"""End-to-end helpers: train a two-stage model, generate, complete graphs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .coords import Normalizer, sample_coords
from .edges import TransitionModel
from .evalkit import is_valid
from .graph import SpatialGraph
from .model import GraphDiffusionModel
from .networks import CoordNetConfig, EdgeDenoiser, EdgeNetConfig, init_coord_params, init_edge_params
from .projector import ChainResult, InterventionLog, ProjectorConfig, link_predict_many, sample_graphs
from .rng import substream
from .schedule import make_schedule
from .training import TrainConfig, coord_batch_loss, edge_batch_loss, edge_examples, fit

log = logging.getLogger(__name__)


@dataclass
class TrainSettings:
    schedule: str = "linear"
    steps: int = 500
    noising: str = "absorbing"
    lr: float = 3e-4
    epochs: int = 200
    batch_size: int = 4
    weight_decay: float = 1e-2
    blocks: int = 3
    hidden: int = 32
    coord_hidden: int = 64
    coord_epochs: int | None = None  # defaults to ``epochs``
    stage: str = "both"  # both | edges | coords
    seed: int = 0


def class_count(graphs: Sequence[SpatialGraph], labels: Sequence[str] = ()) -> int:
    return max(len(labels), max((g.max_label() for g in graphs), default=1)) + 1


def train_model(graphs: Sequence[SpatialGraph], settings: TrainSettings, labels: Sequence[str] = (),
                progress=None) -> GraphDiffusionModel:
    """Fit the normaliser, the edge denoiser and (optionally) the coordinate denoiser."""
    c = class_count(graphs, labels)
    norm = Normalizer.fit([g.coords for g in graphs])
    if settings.noising == "marginal":
        tm = TransitionModel.marginal_from(graphs, c)
    else:
        tm = TransitionModel(settings.noising, c)
    sched = make_schedule(settings.schedule, settings.steps)
    edge_cfg = EdgeNetConfig(classes=c, hidden=settings.hidden, blocks=settings.blocks)
    edge_params = init_edge_params(edge_cfg, substream(settings.seed, "init-edge"))
    history = {"settings": asdict(settings)}
    if settings.stage in ("both", "edges"):
        t0 = time.perf_counter()
        cfg = TrainConfig(lr=settings.lr, epochs=settings.epochs, batch_size=settings.batch_size,
                          weight_decay=settings.weight_decay, seed=int(substream(settings.seed, "train-edge").integers(2**31)))
        edge_params, curve = fit(edge_params, edge_examples(graphs, norm.apply), cfg,
                                 edge_batch_loss(edge_cfg, tm, sched),
                                 progress and (lambda e, l: progress("edges", e, l)))
        history["edge_loss"] = curve
        history["edge_seconds"] = time.perf_counter() - t0
    coord_cfg = CoordNetConfig(hidden=settings.coord_hidden)
    coord_params = None
    if settings.stage in ("both", "coords"):
        t0 = time.perf_counter()
        coord_params = init_coord_params(coord_cfg, substream(settings.seed, "init-coord"))
        epochs = settings.coord_epochs if settings.coord_epochs is not None else settings.epochs
        cfg = TrainConfig(lr=settings.lr, epochs=epochs, batch_size=settings.batch_size,
                          weight_decay=settings.weight_decay, seed=int(substream(settings.seed, "train-coord").integers(2**31)))
        coord_params, curve = fit(coord_params, [norm.apply(g.coords) for g in graphs], cfg,
                                  coord_batch_loss(sched), progress and (lambda e, l: progress("coords", e, l)))
        history["coord_loss"] = curve
        history["coord_seconds"] = time.perf_counter() - t0
    return GraphDiffusionModel(
        edge=EdgeDenoiser(edge_params, edge_cfg), transition=tm, schedule_kind=settings.schedule,
        steps=settings.steps, normalizer=norm, labels=tuple(labels),
        node_counts=tuple(g.node_count for g in graphs), coord_params=coord_params,
        coord_config=coord_cfg, coord_steps=settings.steps, history=history,
    )


def chain_streams(seed: int, count: int, offset: int = 0):
    return [(substream(seed, "edges", offset + i), substream(seed, "projector", offset + i)) for i in range(count)]


def _edge_job(args):
    model, coords, tm, sched, cfg, rngs, chunk = args
    return sample_graphs(model, coords, tm, sched, cfg, rngs, chunk=chunk)


def sample_edges(model: GraphDiffusionModel, coords: Sequence[np.ndarray], cfg: ProjectorConfig, seed: int,
                 transition: TransitionModel | None = None, workers: int = 1, chunk: int = 8,
                 dtype=np.float32) -> list[ChainResult]:
    """Edge stage only, on normalised node positions; one chain per entry of ``coords``."""
    tm = transition or model.transition
    den = model.edge.astype(dtype)
    rngs = chain_streams(seed, len(coords))
    sched = model.schedule
    if workers <= 1 or len(coords) <= chunk:
        return sample_graphs(den, list(coords), tm, sched, cfg, rngs, chunk=chunk)
    # independent chains: split the work so every process keeps whole chunks
    order = sorted(range(len(coords)), key=lambda i: (len(coords[i]), i))
    parts = [order[k::workers] for k in range(workers)]
    jobs = [(den, [coords[i] for i in p], tm, sched, cfg, [rngs[i] for i in p], chunk) for p in parts if p]
    out: list[ChainResult | None] = [None] * len(coords)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for p, res in zip([p for p in parts if p], pool.map(_edge_job, jobs)):
            for i, r in zip(p, res):
                out[i] = r
    return out


def draw_node_counts(model: GraphDiffusionModel, count: int, seed: int) -> list[int]:
    if not model.node_counts:
        raise ValueError("checkpoint carries no node-count distribution")
    rng = substream(seed, "nodes")
    return [int(v) for v in rng.choice(np.asarray(model.node_counts), size=count)]


def generate(model: GraphDiffusionModel, count: int, cfg: ProjectorConfig, seed: int,
             coords_from: Sequence[SpatialGraph] | None = None, workers: int = 1, chunk: int = 8):
    """Two-stage generation. Returns graphs in data units plus their chain results."""
    if coords_from:
        raw = [coords_from[i % len(coords_from)].coords for i in range(count)]
        normed = [model.normalizer.apply(c) for c in raw]
    else:
        if model.coord_params is None:
            raise ValueError("checkpoint has no coordinate model; pass reference coordinates instead")
        sched = model.coord_schedule
        counts = draw_node_counts(model, count, seed)
        normed = [sample_coords(model.coord_params, n, sched, substream(seed, "coords", i)) for i, n in enumerate(counts)]
        raw = [model.normalizer.invert(c) for c in normed]
    results = sample_edges(model, normed, cfg, seed, workers=workers, chunk=chunk)
    graphs = [SpatialGraph(x, r.graph.edges) for x, r in zip(raw, results)]
    return graphs, results


def total_log(results: Sequence[ChainResult]) -> InterventionLog:
    out = InterventionLog()
    for r in results:
        out.merge(r.log)
    return out


def complete_graphs(model: GraphDiffusionModel, partials: Sequence[SpatialGraph], cfg: ProjectorConfig, steps: int,
                    seed: int, chunk: int = 8, dtype=np.float32) -> list[SpatialGraph]:
    """Link prediction for graphs in data units."""
    normed = [model.normalizer.apply(g.coords) for g in partials]
    return link_predict_many(model.edge.astype(dtype), partials, model.transition, model.schedule, cfg, steps,
                             chain_streams(seed, len(partials)), normed, chunk=chunk)


def run_report(graphs: Sequence[SpatialGraph], results: Sequence[ChainResult], cfg: ProjectorConfig,
               noising: str, seconds: float, omega_source: str | None = None) -> dict:
    """Per-run summary: intervention counts and rate, validity flags, timing."""
    samples = []
    for k, (g, r) in enumerate(zip(graphs, results)):
        samples.append({"file": f"graph_{k:05d}.json", "nodes": g.node_count, "edges": g.edge_count,
                        "valid": is_valid(g, cfg.omega, cfg.structural) if cfg.active else None,
                        "interventions": r.log.to_json()})
    total = total_log(results)
    return {
        "count": len(graphs),
        "projector": {"k": cfg.k, "structural": cfg.structural, "omega": omega_source},
        "noising": noising,
        "intervention": total.to_json(),
        "intervention_rate": total.rate,
        "validity_pct": 100.0 * float(np.mean([s["valid"] for s in samples])) if cfg.active and samples else None,
        "timing": {"sampling_seconds": round(seconds, 3)},
        "samples": samples,
    }
