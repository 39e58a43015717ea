"""Synthetic airway-like trees and circle-of-Willis-like graphs, plus corpus I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import GraphError, OmegaMatrix, SpatialGraph, check_omega, hierarchy_omega, load_graph, save_graph

TREE_LEVELS = 4


def _rotate_towards(d: np.ndarray, angle: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector at ``angle`` radians from unit vector ``d``, random azimuth."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(d, helper)
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    phi = rng.uniform(0, 2 * math.pi)
    out = math.cos(angle) * d + math.sin(angle) * (math.cos(phi) * u + math.sin(phi) * v)
    return out / np.linalg.norm(out)


def gen_airway_tree(n: int, rng: np.random.Generator, levels: int = TREE_LEVELS, depth_per_level: int = 3) -> SpatialGraph:
    """Random spatial tree whose edge labels coarsen with depth.

    Nodes attach to open tips (weight 3) or to nodes with a single child
    (weight 1, a bifurcation). Segment length shrinks with level, so labels are
    visible in the geometry.
    """
    if n < 2:
        raise ValueError("a tree needs at least two nodes")
    coords = [np.zeros(3), np.array([0.0, 0.0, -1.0])]
    direction = [np.array([0.0, 0.0, -1.0])] * 2
    depth = [0, 0]  # depth of the edge entering the node
    children = [1, 0]
    edges = [(0, 1, 1)]
    for new in range(2, n):
        cand = [v for v in range(1, new) if children[v] < 2]
        w = np.array([3.0 if children[v] == 0 else 1.0 for v in cand])
        parent = cand[rng.choice(len(cand), p=w / w.sum())]
        d_edge = depth[parent] + 1
        level = min(levels, 1 + d_edge // depth_per_level)
        angle = rng.uniform(0.15, 0.45) if children[parent] == 0 else rng.uniform(0.6, 1.0)
        d = _rotate_towards(direction[parent], angle, rng)
        length = 0.8 * 0.78 ** (level - 1) * rng.uniform(0.85, 1.15)
        coords.append(coords[parent] + length * d)
        direction.append(d)
        depth.append(d_edge)
        children.append(0)
        children[parent] += 1
        edges.append((parent, new, level))
    return SpatialGraph(np.array(coords), tuple(edges), {"kind": "tree"})


COW_LABELS = ("BA", "PCA", "Pcom", "ICA", "MCA", "ACA")


def cow_omega() -> OmegaMatrix:
    # BA, PCA, Pcom, ICA, MCA, ACA
    m = np.array([
        [0, 0, 1, 1, 1, 1],
        [0, 0, 0, 1, 1, 1],
        [1, 0, 0, 0, 0, 0],
        [1, 1, 0, 1, 0, 0],
        [1, 1, 0, 0, 1, 0],
        [1, 1, 0, 0, 0, 0],
    ])
    return OmegaMatrix(m, COW_LABELS)


def _cow_template():
    coords = np.array([
        [0.0, -2.0, -1.0], [0.0, -1.0, 0.0],
        [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0],
        [-2.0, -1.5, 0.2], [2.0, -1.5, 0.2],
        [-1.0, 0.5, 0.0], [1.0, 0.5, 0.0],
        [-1.0, 0.5, -1.5], [1.0, 0.5, -1.5],
        [-2.5, 0.8, 0.3], [2.5, 0.8, 0.3],
        [-0.4, 1.5, 0.2], [0.4, 1.5, 0.2],
        [-0.4, 2.5, 0.5], [0.4, 2.5, 0.5],
    ])
    edges = (
        (0, 1, 1), (1, 2, 2), (1, 3, 2), (2, 4, 2), (3, 5, 2),
        (2, 6, 3), (3, 7, 3), (6, 8, 4), (7, 9, 4), (6, 10, 5), (7, 11, 5),
        (6, 12, 6), (7, 13, 6), (12, 13, 6), (12, 14, 6), (13, 15, 6),
    )
    return coords, edges


@dataclass(frozen=True)
class TemplateSpec:
    coords: np.ndarray = field(default_factory=lambda: _cow_template()[0])
    edges: tuple = field(default_factory=lambda: _cow_template()[1])
    omega: OmegaMatrix = field(default_factory=cow_omega)
    jitter: float = 0.08
    dropout: float = 0.1

    def template(self) -> SpatialGraph:
        return SpatialGraph(self.coords, self.edges, {"kind": "cow"})


def gen_cow_like(spec: TemplateSpec, rng: np.random.Generator) -> SpatialGraph:
    """Jittered copy of the template with each edge dropped independently."""
    tpl = spec.template()
    report = check_omega(tpl, spec.omega)
    if report:
        raise GraphError("template violates its own omega: " + "; ".join(report.lines()))
    coords = tpl.coords + spec.jitter * rng.standard_normal(tpl.coords.shape)
    keep = rng.random(tpl.edge_count) >= spec.dropout
    edges = tuple(e for e, k in zip(tpl.edges, keep) if k)
    return SpatialGraph(coords, edges, {"kind": "cow"})


def tree_corpus(count: int, min_nodes: int, max_nodes: int, rng: np.random.Generator) -> list[SpatialGraph]:
    return [gen_airway_tree(int(rng.integers(min_nodes, max_nodes + 1)), rng) for _ in range(count)]


def tree_omega() -> OmegaMatrix:
    return hierarchy_omega(TREE_LEVELS)


# --- corpus I/O --------------------------------------------------------------

CORPUS_INDEX = "corpus.json"


@dataclass
class Corpus:
    graphs: list[SpatialGraph]
    labels: tuple[str, ...] = ()

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)


def save_corpus(graphs, out_dir, labels=()) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for k, g in enumerate(graphs):
        p = out / f"graph_{k:05d}.json"
        save_graph(g, p)
        names.append(p)
    index = {"count": len(names), "files": [p.name for p in names], "labels": list(labels)}
    (out / CORPUS_INDEX).write_text(json.dumps(index, indent=1), encoding="utf-8")
    return names


def load_corpus(in_dir) -> Corpus:
    """Load every graph file of a directory (sorted by name)."""
    d = Path(in_dir)
    if not d.is_dir():
        raise GraphError(f"{d}: not a directory")
    labels: tuple[str, ...] = ()
    idx = d / CORPUS_INDEX
    if idx.exists():
        try:
            meta = json.loads(idx.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise GraphError(f"{idx.name}: invalid JSON ({err.msg})") from None
        labels = tuple(meta.get("labels") or ())
        files = [d / name for name in meta.get("files", [])]
    else:
        files = sorted(p for p in d.glob("*.json") if p.name != CORPUS_INDEX and not p.name.endswith("manifest.json"))
    graphs = []
    for p in files:
        g = load_graph(p)
        if labels:
            for i, j, lab in g.edges:
                if lab > len(labels):
                    raise GraphError(f"{p.name}: edge ({i}, {j}) label {lab} outside alphabet of {len(labels)} labels")
        graphs.append(g)
    return Corpus(graphs, labels)
