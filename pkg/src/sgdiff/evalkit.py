"""Graph statistics, corpus comparison and link-prediction scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import GraphError, OmegaMatrix, SpatialGraph, betti0, betti1, check_omega

FEATURES = ("degree", "edge_count", "length", "angle")
INTEGER_FEATURES = ("degree", "edge_count")


@dataclass
class GraphStats:
    degrees: np.ndarray
    edge_count: int
    lengths: np.ndarray
    angles: np.ndarray  # degrees
    betti0: int
    betti1: int
    zero_length_edges: list = field(default_factory=list)

    def feature(self, name: str) -> np.ndarray:
        if name == "edge_count":
            return np.array([self.edge_count], dtype=np.float64)
        if name == "degree":
            return self.degrees.astype(np.float64)
        if name == "length":
            return self.lengths
        if name == "angle":
            return self.angles
        raise KeyError(f"unknown feature {name!r}; choose from {FEATURES}")


def graph_stats(g: SpatialGraph) -> GraphStats:
    X = g.coords
    deg = np.zeros(g.node_count, dtype=np.int64)
    lengths = []
    zero = []
    inc: list[list[np.ndarray]] = [[] for _ in range(g.node_count)]
    for i, j, lab in g.edges:
        deg[i] += 1
        deg[j] += 1
        d = X[j] - X[i]
        L = float(np.linalg.norm(d))
        lengths.append(L)
        if L == 0.0:
            zero.append((i, j, lab))
            continue
        inc[i].append(d / L)
        inc[j].append(-d / L)
    angles = []
    for dirs in inc:
        for p in range(len(dirs)):
            for q in range(p + 1, len(dirs)):
                angles.append(np.degrees(np.arccos(np.clip(dirs[p] @ dirs[q], -1.0, 1.0))))
    return GraphStats(deg, g.edge_count, np.array(lengths), np.array(angles), betti0(g), betti1(g), zero)


def _histograms(ref: np.ndarray, gen: np.ndarray, integer: bool, bins: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(ref.min()), float(ref.max())
    if integer:
        edges = np.arange(np.floor(lo), np.floor(hi) + 2) - 0.5
    else:
        edges = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
    # out-of-range generated values land in the end bins
    gen = np.clip(gen, edges[0], edges[-1])
    p, _ = np.histogram(ref, edges)
    q, _ = np.histogram(gen, edges)
    return p.astype(np.float64), q.astype(np.float64)


def kl_from_counts(p_counts: np.ndarray, q_counts: np.ndarray, smoothing: float = 1.0) -> float:
    p = p_counts + smoothing
    q = q_counts + smoothing
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def kl_feature(reference: Sequence[GraphStats], generated: Sequence[GraphStats], feature: str, bins: int = 50) -> float:
    """``KL(reference || generated)`` between Laplace-smoothed histograms.

    Bins span the reference range; degree and edge count get one bin per integer.
    """
    if not reference or not generated:
        raise ValueError("both corpora must be non-empty")
    ref = np.concatenate([s.feature(feature) for s in reference])
    gen = np.concatenate([s.feature(feature) for s in generated])
    if ref.size == 0:
        return 0.0
    if gen.size == 0:
        gen = np.array([ref.min() - 1.0])  # nothing generated: all mass outside the support
    p, q = _histograms(ref, gen, feature in INTEGER_FEATURES, bins)
    return kl_from_counts(p, q)


def is_valid(g: SpatialGraph, omega: OmegaMatrix | None, structural: str | None = None) -> bool:
    return not check_omega(g, omega, structural)


def validity_rate(graphs: Sequence[SpatialGraph], omega: OmegaMatrix | None, structural: str | None = None) -> float:
    if not graphs:
        return 100.0
    return 100.0 * sum(is_valid(g, omega, structural) for g in graphs) / len(graphs)


def compare_corpora(reference: Sequence[SpatialGraph], generated: Sequence[SpatialGraph],
                    omega: OmegaMatrix | None = None, structural: str | None = None, bins: int = 50) -> dict:
    """Table-style comparison: KL values scaled by 1e3, Betti gaps, validity percentage."""
    rs = [graph_stats(g) for g in reference]
    gs = [graph_stats(g) for g in generated]
    out = {"kl_x1e3": {f: 1e3 * kl_feature(rs, gs, f, bins) for f in FEATURES}}
    out["betti0_abs_mean_diff"] = abs(np.mean([s.betti0 for s in rs]) - np.mean([s.betti0 for s in gs]))
    out["betti1_abs_mean_diff"] = abs(np.mean([s.betti1 for s in rs]) - np.mean([s.betti1 for s in gs]))
    out["semantic_validity_pct"] = validity_rate(generated, omega, structural)
    out["reference_count"] = len(rs)
    out["generated_count"] = len(gs)
    out["mean_edges"] = {"reference": float(np.mean([s.edge_count for s in rs])),
                         "generated": float(np.mean([s.edge_count for s in gs]))}
    return out


def _held_out_labels(g: SpatialGraph, pairs: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    n = g.node_count
    E = np.zeros((n, n), dtype=np.int64)
    for i, j, lab in g.edges:
        E[i, j] = lab
    return E[pairs]


def link_pred_metrics(predicted: SpatialGraph, truth: SpatialGraph, given: SpatialGraph) -> tuple[float, float]:
    """Balanced accuracy (percent) and macro F1 over the pairs absent from ``given``.

    Class 0 (no edge) is scored like any other class. Recall is averaged over
    classes present in the truth; F1 over classes present in truth or prediction.
    """
    if not (predicted.node_count == truth.node_count == given.node_count):
        raise GraphError("predicted, truth and input must share the node set")
    n = truth.node_count
    iu, ju = np.triu_indices(n, 1)
    observed = set((i, j) for i, j, _ in given.edges)
    keep = np.array([(i, j) not in observed for i, j in zip(iu.tolist(), ju.tolist())], dtype=bool)
    pairs = (iu[keep], ju[keep])
    y_true = _held_out_labels(truth, pairs)
    y_pred = _held_out_labels(predicted, pairs)
    return balanced_accuracy(y_true, y_pred), macro_f1(y_true, y_pred)


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    classes = np.unique(y_true)
    if classes.size == 0:
        return 100.0
    recalls = [np.mean(y_pred[y_true == c] == c) for c in classes]
    return 100.0 * float(np.mean(recalls))


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    classes = np.union1d(np.unique(y_true), np.unique(y_pred))
    if classes.size == 0:
        return 1.0
    scores = []
    for c in classes:
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        scores.append(2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0)
    return float(np.mean(scores))
