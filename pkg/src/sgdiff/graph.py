"""Spatial graphs with labeled edges, label-adjacency constraints and topology.

Edges are undirected and stored canonically as ``(i, j, label)`` with ``i < j``.
Label 0 is the "no edge" class and never appears in a graph; real edge labels
run from 1 to ``c'`` (the number of edge classes).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Malformed graph or constraint data."""


@dataclass(frozen=True)
class SpatialGraph:
    coords: np.ndarray
    edges: tuple[tuple[int, int, int], ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64).reshape(-1, 3)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        n = coords.shape[0]
        if n < 1:
            raise GraphError("graph needs at least one node")
        if not np.all(np.isfinite(coords)):
            raise GraphError("non-finite node coordinates")
        canon = []
        seen = set()
        for e in self.edges:
            i, j, lab = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= n:
                raise GraphError(f"edge ({i}, {j}) out of range for {n} nodes")
            if lab < 1:
                raise GraphError(f"edge ({i}, {j}) has label {lab} < 1")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            canon.append((i, j, lab))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def node_count(self) -> int:
        return self.coords.shape[0]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, SpatialGraph):
            return NotImplemented
        return self.edges == other.edges and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.edges, self.coords.tobytes()))

    def edge_dict(self) -> dict[tuple[int, int], int]:
        return {(i, j): lab for i, j, lab in self.edges}

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-node list of ``(neighbor, label)``."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.node_count)]
        for i, j, lab in self.edges:
            adj[i].append((j, lab))
            adj[j].append((i, lab))
        return adj

    def with_edges(self, edges: Iterable[tuple[int, int, int]]) -> "SpatialGraph":
        return SpatialGraph(self.coords, tuple(edges), dict(self.meta))

    def add_edge(self, i: int, j: int, label: int) -> "SpatialGraph":
        return self.with_edges(self.edges + ((i, j, label),))

    def max_label(self) -> int:
        return max((lab for _, _, lab in self.edges), default=0)

    def to_json(self) -> dict:
        out = {
            "nodes": [[float(v) for v in row] for row in self.coords],
            "edges": [list(e) for e in self.edges],
        }
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SpatialGraph":
        if not isinstance(obj, dict) or "nodes" not in obj or "edges" not in obj:
            raise GraphError("graph JSON needs 'nodes' and 'edges'")
        nodes = obj["nodes"]
        if not all(isinstance(p, list) and len(p) == 3 for p in nodes):
            raise GraphError("each node must be an [x, y, z] triple")
        for k, p in enumerate(nodes):
            for v in p:
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise GraphError(f"node {k} has a non-finite or non-numeric coordinate")
        edges = []
        for k, e in enumerate(obj["edges"]):
            if not (isinstance(e, list) and len(e) == 3 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
                raise GraphError(f"edge entry {k} must be an [i, j, label] integer triple")
            edges.append(tuple(e))
        return cls(np.array(nodes, dtype=np.float64).reshape(-1, 3), tuple(edges), dict(obj.get("meta") or {}))


def dumps_graph(g: SpatialGraph) -> str:
    return json.dumps(g.to_json(), sort_keys=True)


def save_graph(g: SpatialGraph, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps_graph(g), encoding="utf-8")
    tmp.replace(path)


def load_graph(path) -> SpatialGraph:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise GraphError(f"{path.name}: invalid JSON ({err.msg})") from None
    try:
        return SpatialGraph.from_json(obj)
    except GraphError as err:
        raise GraphError(f"{path.name}: {err}") from None


@dataclass(frozen=True)
class OmegaMatrix:
    """Binary label-adjacency table: ``matrix[a-1, b-1] == 1`` forbids labels a and b at a shared node."""

    matrix: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.int8)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise GraphError(f"omega must be a non-empty square matrix, got shape {m.shape}")
        if not np.isin(m, (0, 1)).all():
            raise GraphError("omega entries must be 0 or 1")
        if not np.array_equal(m, m.T):
            raise GraphError("omega must be symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        labels = tuple(self.labels) or tuple(f"L{a}" for a in range(1, m.shape[0] + 1))
        if len(labels) != m.shape[0]:
            raise GraphError(f"{len(labels)} label names for a {m.shape[0]}x{m.shape[0]} omega")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def forbidden(self, a: int, b: int) -> bool:
        return bool(self.matrix[a - 1, b - 1])

    def __eq__(self, other):
        if not isinstance(other, OmegaMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.labels, self.matrix.tobytes()))

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "matrix": self.matrix.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "OmegaMatrix":
        if not isinstance(obj, dict) or "matrix" not in obj or "labels" not in obj:
            raise GraphError("omega JSON needs 'labels' and 'matrix'")
        return cls(np.array(obj["matrix"]), tuple(obj["labels"]))


def hierarchy_omega(levels: int = 4) -> OmegaMatrix:
    """Levels may meet when their gap is at most one."""
    idx = np.arange(levels)
    m = (np.abs(idx[:, None] - idx[None, :]) >= 2).astype(np.int8)
    return OmegaMatrix(m, tuple(f"level{a}" for a in range(1, levels + 1)))


def save_omega(omega: OmegaMatrix, path) -> None:
    Path(path).write_text(json.dumps(omega.to_json()), encoding="utf-8")


def load_omega(path) -> OmegaMatrix:
    path = Path(path)
    try:
        return OmegaMatrix.from_json(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as err:
        raise GraphError(f"{path.name}: invalid JSON ({err.msg})") from None
    except GraphError as err:
        raise GraphError(f"{path.name}: {err}") from None


@dataclass
class ViolationReport:
    violations: list[tuple[int, tuple[int, int, int], tuple[int, int, int]]] = field(default_factory=list)
    cycle_edges: list[tuple[int, int, int]] = field(default_factory=list)

    def __bool__(self):
        # truthy when something is wrong
        return bool(self.violations or self.cycle_edges)

    @property
    def valid(self) -> bool:
        return not self

    def lines(self) -> list[str]:
        out = [
            f"node {v}: edge ({a[0]},{a[1]}) label {a[2]} conflicts with edge ({b[0]},{b[1]}) label {b[2]}"
            for v, a, b in self.violations
        ]
        out += [f"cycle edge ({i},{j}) label {lab}" for i, j, lab in self.cycle_edges]
        return out


def neighbors(g: SpatialGraph, v: int) -> set[int]:
    if not 0 <= v < g.node_count:
        raise IndexError(f"node {v} out of range for {g.node_count} nodes")
    return {j for j, _ in g.adjacency()[v]}


def _check_labels(g: SpatialGraph, omega: OmegaMatrix) -> None:
    if g.max_label() > omega.size:
        raise GraphError(f"edge label {g.max_label()} outside omega range 1..{omega.size}")


def check_omega(g: SpatialGraph, omega: OmegaMatrix | None, structural: str | None = None) -> ViolationReport:
    """Report every forbidden pair of edges sharing a node, once per unordered pair.

    With ``structural="forest"`` the edges lying on cycles are reported as well.
    """
    report = ViolationReport()
    if omega is not None:
        _check_labels(g, omega)
        for v, inc in enumerate(g.adjacency()):
            for p in range(len(inc)):
                for q in range(p + 1, len(inc)):
                    (i, a), (j, b) = inc[p], inc[q]
                    if omega.forbidden(a, b):
                        report.violations.append((v, (min(i, v), max(i, v), a), (min(j, v), max(j, v), b)))
    if structural == "forest":
        report.cycle_edges = cycle_edges(g)
    elif structural not in (None, "none"):
        raise ValueError(f"unknown structural constraint {structural!r}")
    return report


def would_violate(g: SpatialGraph, i: int, j: int, label: int, omega: OmegaMatrix, adjacency=None) -> bool:
    """Whether adding ``(i, j, label)`` breaks the label constraint at ``i`` or ``j``.

    ``adjacency`` may be a live ``(neighbor, label)`` list per node kept by the caller.
    """
    adj = adjacency if adjacency is not None else g.adjacency()
    if any(n == j for n, _ in adj[i]):
        raise GraphError(f"edge ({i}, {j}) already present")
    if label > omega.size or label < 1:
        raise GraphError(f"label {label} outside omega range 1..{omega.size}")
    row = omega.matrix[label - 1]
    return any(row[b - 1] for _, b in adj[i]) or any(row[b - 1] for _, b in adj[j])


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    @classmethod
    def of(cls, g: SpatialGraph) -> "UnionFind":
        uf = cls(g.node_count)
        for i, j, _ in g.edges:
            uf.union(i, j)
        return uf


def betti0(g: SpatialGraph) -> int:
    return UnionFind.of(g).components


def betti1(g: SpatialGraph) -> int:
    return g.edge_count - g.node_count + betti0(g)


def creates_cycle(g: SpatialGraph, i: int, j: int, uf: UnionFind | None = None) -> bool:
    if (min(i, j), max(i, j)) in g.edge_dict():
        raise GraphError(f"edge ({i}, {j}) already present")
    return (uf or UnionFind.of(g)).connected(i, j)


def cycle_edges(g: SpatialGraph) -> list[tuple[int, int, int]]:
    """Edges that lie on at least one cycle (the non-bridges)."""
    n = g.node_count
    adj = [[] for _ in range(n)]
    for k, (i, j, _) in enumerate(g.edges):
        adj[i].append((j, k))
        adj[j].append((i, k))
    disc = [-1] * n
    low = [0] * n
    bridge = [False] * len(g.edges)
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == via:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridge[via] = True
    return [e for e, b in zip(g.edges, bridge) if not b]
