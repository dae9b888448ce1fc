"""Directed graphs over dense integer node ids: edge-list I/O and random generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from io import StringIO
from pathlib import Path
from typing import IO, Iterable

import numpy as np

log = logging.getLogger(__name__)

COMMENT_PREFIXES = ("#", "%")


class EdgeListError(ValueError):
    """Raised for malformed or empty edge-list input."""


class DirectedGraph:
    """Immutable directed graph with node ids 0..node_count-1.

    Arcs are stored in canonical (source, target) sorted order together with
    CSR-style forward and reverse adjacency, so neighbor queries are array
    slices. Self-loops and duplicate arcs are dropped on construction.
    """

    __slots__ = ("_n", "_arcs", "_fwd_indptr", "_fwd_indices",
                 "_rev_indptr", "_rev_indices")

    def __init__(self, node_count: int, arcs: Iterable[tuple[int, int]] | np.ndarray):
        if node_count < 1:
            raise ValueError(f"node_count must be >= 1, got {node_count}")
        arr = np.asarray(list(arcs) if not isinstance(arcs, np.ndarray) else arcs,
                         dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("arcs must be pairs of node ids")
        if arr.size and (arr.min() < 0 or arr.max() >= node_count):
            raise ValueError("arc endpoint outside 0..node_count-1")
        arr = arr[arr[:, 0] != arr[:, 1]]                      # drop self-loops
        arr = np.unique(arr, axis=0) if arr.size else arr      # dedup + canonical sort
        self._n = int(node_count)
        self._arcs = arr
        self._fwd_indptr, self._fwd_indices = _build_csr(node_count, arr[:, 0], arr[:, 1])
        self._rev_indptr, self._rev_indices = _build_csr(node_count, arr[:, 1], arr[:, 0])
        for a in (self._arcs, self._fwd_indptr, self._fwd_indices,
                  self._rev_indptr, self._rev_indices):
            a.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def arc_count(self) -> int:
        return int(self._arcs.shape[0])

    @property
    def arcs(self) -> np.ndarray:
        """(m, 2) array of (source, target) pairs, sorted, read-only."""
        return self._arcs

    @property
    def out_indptr(self) -> np.ndarray:
        return self._fwd_indptr

    @property
    def out_indices(self) -> np.ndarray:
        return self._fwd_indices

    @property
    def in_indptr(self) -> np.ndarray:
        return self._rev_indptr

    @property
    def in_indices(self) -> np.ndarray:
        return self._rev_indices

    def out_neighbors(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self._fwd_indices[self._fwd_indptr[v]:self._fwd_indptr[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self._rev_indices[self._rev_indptr[v]:self._rev_indptr[v + 1]]

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self._fwd_indptr)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.diff(self._rev_indptr)

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self._n:
            raise IndexError(f"node id {v} outside 0..{self._n - 1}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._arcs, other._arcs)

    def __repr__(self) -> str:
        return f"DirectedGraph(node_count={self._n}, arc_count={self.arc_count})"


def _build_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst[order].astype(np.int64)


def out_neighbors(graph: DirectedGraph, v: int) -> np.ndarray:
    """Out-neighbors of v; length equals the out-degree of v."""
    return graph.out_neighbors(v)


@dataclass(frozen=True)
class LoadedEdgeList:
    """A parsed edge list: the graph plus the mapping back to original ids."""

    graph: DirectedGraph
    id_map: np.ndarray            # id_map[dense_id] -> original id
    dropped_self_loops: int
    dropped_duplicates: int

    def to_original(self, dense_ids: Iterable[int]) -> list[int]:
        return [int(self.id_map[i]) for i in dense_ids]

    def to_dense(self, original_ids: Iterable[int]) -> list[int]:
        lookup = {int(o): i for i, o in enumerate(self.id_map)}
        try:
            return [lookup[int(o)] for o in original_ids]
        except KeyError as exc:
            raise KeyError(f"unknown original node id {exc.args[0]}") from None


def load_edge_list(source: IO[str] | str | Path) -> LoadedEdgeList:
    """Parse whitespace-separated "source target" lines into a DirectedGraph.

    Lines starting with '#' or '%' are comments. Node ids may be arbitrary
    integers; they are remapped (in ascending order) to dense 0-based ids and
    the original ids are kept in the returned id_map. Self-loops and duplicate
    arcs are dropped with a counted warning.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_edge_list(fh)
    raw_pairs: list[tuple[int, int]] = []
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(COMMENT_PREFIXES):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise EdgeListError(f"line {lineno}: expected 2 tokens, got {len(tokens)}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer node id in {stripped!r}") from None
        raw_pairs.append((u, v))
    if not raw_pairs:
        raise EdgeListError("empty graph: no arcs found in input")
    raw = np.asarray(raw_pairs, dtype=np.int64)
    original_ids = np.unique(raw)
    dense = np.searchsorted(original_ids, raw)
    self_loops = int(np.count_nonzero(dense[:, 0] == dense[:, 1]))
    proper = dense[dense[:, 0] != dense[:, 1]]
    unique_count = np.unique(proper, axis=0).shape[0] if proper.size else 0
    duplicates = int(proper.shape[0] - unique_count)
    if self_loops or duplicates:
        log.warning("edge list: dropped %d self-loop(s) and %d duplicate arc(s)",
                    self_loops, duplicates)
    graph = DirectedGraph(len(original_ids), dense)
    return LoadedEdgeList(graph=graph, id_map=original_ids,
                          dropped_self_loops=self_loops,
                          dropped_duplicates=duplicates)


def write_edge_list(graph: DirectedGraph, target: IO[str] | str | Path,
                    id_map: np.ndarray | None = None) -> None:
    """Write one "source target" line per arc, in canonical sorted order."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            write_edge_list(graph, fh, id_map=id_map)
            return
    for u, v in graph.arcs:
        if id_map is not None:
            u, v = id_map[u], id_map[v]
        target.write(f"{u} {v}\n")


def edge_list_text(graph: DirectedGraph) -> str:
    buf = StringIO()
    write_edge_list(graph, buf)
    return buf.getvalue()


def write_id_map_csv(id_map: np.ndarray, target: IO[str] | str | Path) -> None:
    """Two-column CSV mapping dense ids back to original edge-list ids."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_id_map_csv(id_map, fh)
            return
    target.write("node_id,original_id\n")
    for dense, original in enumerate(id_map):
        target.write(f"{dense},{int(original)}\n")


_ER_BLOCK_CELLS = 4_000_000  # cap on random cells drawn per block


def generate_erdos_renyi(n: int, p: float, seed: int) -> DirectedGraph:
    """Random digraph: every ordered pair (u, v), u != v, gets an arc with probability p.

    Deterministic for a fixed seed. Rows are drawn in fixed-size blocks so
    memory stays bounded on large n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    block = max(1, min(n, _ER_BLOCK_CELLS // n))
    chunks: list[np.ndarray] = []
    for row0 in range(0, n, block):
        rows = min(block, n - row0)
        mask = rng.random((rows, n)) < p
        mask[np.arange(rows), np.arange(row0, row0 + rows)] = False
        src, dst = np.nonzero(mask)
        if src.size:
            chunks.append(np.column_stack((src + row0, dst)))
    arcs = np.vstack(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return DirectedGraph(n, arcs)
