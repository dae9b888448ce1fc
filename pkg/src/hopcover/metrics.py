"""Per-node centrality metrics (in/out-degree, closeness, betweenness, pagerank).

All five metrics are computed exactly on the directed graph and min-max
normalized per column to [0, 1]; the normalized table is what prompts and
node probabilities consume.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import IO, NamedTuple

import numpy as np

from .graphs import DirectedGraph

METRIC_NAMES = ("in_degree", "out_degree", "closeness", "betweenness", "pagerank")


@dataclass(frozen=True)
class MetricsTable:
    """Raw and normalized (n, 5) metric matrices, column order METRIC_NAMES."""

    raw: np.ndarray
    normalized: np.ndarray

    def __post_init__(self):
        if self.raw.shape != self.normalized.shape or self.raw.ndim != 2 \
                or self.raw.shape[1] != len(METRIC_NAMES):
            raise ValueError("metric tables must be (n, 5) arrays")
        for name in ("raw", "normalized"):
            owned = np.array(getattr(self, name), dtype=float)
            owned.setflags(write=False)
            object.__setattr__(self, name, owned)

    @property
    def node_count(self) -> int:
        return self.raw.shape[0]

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.normalized).tobytes())
        return digest.hexdigest()[:16]

    def row(self, v: int) -> np.ndarray:
        return self.normalized[v]


def compute_degree_metrics(graph: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Raw (in_degree, out_degree) counts per node."""
    return (graph.in_degrees.astype(float), graph.out_degrees.astype(float))


def _gather(indptr: np.ndarray, indices: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Concatenate the adjacency slices of `nodes` in one vectorized pass."""
    counts = indptr[nodes + 1] - indptr[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    starts = np.cumsum(counts) - counts
    offsets = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    return indices[np.repeat(indptr[nodes], counts) + offsets]


def bfs_distances(indptr: np.ndarray, indices: np.ndarray, n: int, source: int,
                  max_depth: int | None = None) -> np.ndarray:
    """Unweighted distances from `source`; unreachable nodes get -1."""
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    depth = 0
    while frontier.size and (max_depth is None or depth < max_depth):
        neighbors = _gather(indptr, indices, frontier)
        neighbors = neighbors[dist[neighbors] < 0]
        if neighbors.size == 0:
            break
        frontier = np.unique(neighbors)
        depth += 1
        dist[frontier] = depth
    return dist


def compute_closeness(graph: DirectedGraph, direction: str = "out") -> np.ndarray:
    """Harmonic closeness: mean over v != u of 1/dist(u, v), unreachable -> 0.

    direction "out" measures distances along arcs (u to others), "in" against
    them; both run one BFS per node.
    """
    if direction not in ("out", "in"):
        raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")
    n = graph.node_count
    if direction == "out":
        indptr, indices = graph.out_indptr, graph.out_indices
    else:
        indptr, indices = graph.in_indptr, graph.in_indices
    values = np.zeros(n, dtype=float)
    if n == 1:
        return values
    for u in range(n):
        dist = bfs_distances(indptr, indices, n, u)
        reached = dist[dist > 0]
        if reached.size:
            values[u] = float((1.0 / reached).sum()) / (n - 1)
    return values


def compute_betweenness(graph: DirectedGraph) -> np.ndarray:
    """Exact directed betweenness, endpoints excluded, no normalization.

    One augmented BFS per source: shortest-path counts flow forward layer by
    layer over the BFS DAG, dependencies flow backward.
    """
    n = graph.node_count
    src_arc = graph.arcs[:, 0]
    dst_arc = graph.arcs[:, 1]
    indptr, indices = graph.out_indptr, graph.out_indices
    centrality = np.zeros(n, dtype=float)
    for s in range(n):
        dist = bfs_distances(indptr, indices, n, s)
        du = dist[src_arc]
        dv = dist[dst_arc]
        on_dag = (du >= 0) & (dv == du + 1)
        if not on_dag.any():
            continue
        dag_u = src_arc[on_dag]
        dag_v = dst_arc[on_dag]
        dag_layer = du[on_dag]
        order = np.argsort(dag_layer, kind="stable")
        dag_u, dag_v, dag_layer = dag_u[order], dag_v[order], dag_layer[order]
        bounds = np.searchsorted(dag_layer, np.arange(dag_layer[-1] + 2))
        sigma = np.zeros(n, dtype=float)
        sigma[s] = 1.0
        for layer in range(len(bounds) - 1):
            lo, hi = bounds[layer], bounds[layer + 1]
            if lo < hi:
                np.add.at(sigma, dag_v[lo:hi], sigma[dag_u[lo:hi]])
        delta = np.zeros(n, dtype=float)
        for layer in range(len(bounds) - 2, -1, -1):
            lo, hi = bounds[layer], bounds[layer + 1]
            if lo < hi:
                contrib = sigma[dag_u[lo:hi]] / sigma[dag_v[lo:hi]] * (1.0 + delta[dag_v[lo:hi]])
                np.add.at(delta, dag_u[lo:hi], contrib)
        delta[s] = 0.0
        centrality += delta
    return centrality


class PagerankResult(NamedTuple):
    values: np.ndarray
    converged: bool
    iterations: int


def compute_pagerank(graph: DirectedGraph, damping: float = 0.85,
                     tol: float = 1e-8, max_iter: int = 100) -> PagerankResult:
    """Power iteration with uniform teleport and uniform dangling redistribution.

    Stops when the L1 change drops below tol; non-convergence returns the last
    iterate with converged=False. The result always sums to 1.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    n = graph.node_count
    out_deg = graph.out_degrees.astype(float)
    dangling = out_deg == 0
    src_arc = graph.arcs[:, 0]
    dst_arc = graph.arcs[:, 1]
    rank = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        share = np.zeros(n)
        nonzero = ~dangling
        share[nonzero] = rank[nonzero] / out_deg[nonzero]
        incoming = np.zeros(n)
        np.add.at(incoming, dst_arc, share[src_arc])
        new_rank = teleport + damping * (incoming + rank[dangling].sum() / n)
        change = np.abs(new_rank - rank).sum()
        rank = new_rank
        if change < tol:
            converged = True
            break
    return PagerankResult(values=rank, converged=converged, iterations=iterations)


def normalize_metrics(raw: np.ndarray) -> MetricsTable:
    """Min-max scale each column to [0, 1]; a constant column maps to all zeros."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != len(METRIC_NAMES):
        raise ValueError("raw metrics must be an (n, 5) array")
    if not np.isfinite(raw).all():
        raise ValueError("raw metrics contain NaN or Inf")
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    normalized = np.zeros_like(raw)
    varying = span > 0
    normalized[:, varying] = (raw[:, varying] - lo[varying]) / span[varying]
    return MetricsTable(raw=raw, normalized=normalized)


def compute_metrics(graph: DirectedGraph, closeness_direction: str = "out",
                    damping: float = 0.85, pagerank_tol: float = 1e-8,
                    pagerank_max_iter: int = 100) -> MetricsTable:
    """All five metrics, raw and normalized, for every node of the graph."""
    in_deg, out_deg = compute_degree_metrics(graph)
    closeness = compute_closeness(graph, direction=closeness_direction)
    betweenness = compute_betweenness(graph)
    pagerank = compute_pagerank(graph, damping=damping, tol=pagerank_tol,
                                max_iter=pagerank_max_iter).values
    raw = np.column_stack((in_deg, out_deg, closeness, betweenness, pagerank))
    return normalize_metrics(raw)


def write_metrics_csv(table: MetricsTable, target: IO[str] | str | Path) -> None:
    """CSV with node id, the five raw columns, then the five normalized columns."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_metrics_csv(table, fh)
            return
    writer = csv.writer(target)
    header = ["node"] + [f"{m}_raw" for m in METRIC_NAMES] \
        + [f"{m}_norm" for m in METRIC_NAMES]
    writer.writerow(header)
    for v in range(table.node_count):
        writer.writerow([v] + [repr(float(x)) for x in table.raw[v]]
                        + [repr(float(x)) for x in table.normalized[v]])


def read_metrics_csv(source: IO[str] | str | Path) -> MetricsTable:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_metrics_csv(fh)
    reader = csv.reader(source)
    header = next(reader)
    expected = ["node"] + [f"{m}_raw" for m in METRIC_NAMES] \
        + [f"{m}_norm" for m in METRIC_NAMES]
    if header != expected:
        raise ValueError(f"unexpected metrics CSV header: {header}")
    raw_rows, norm_rows = [], []
    for row in reader:
        raw_rows.append([float(x) for x in row[1:6]])
        norm_rows.append([float(x) for x in row[6:11]])
    if not raw_rows:
        raise ValueError("metrics CSV has no rows")
    return MetricsTable(raw=np.asarray(raw_rows), normalized=np.asarray(norm_rows))
