"""d-hop influence sets and the coverage objective on directed graphs.

A seed set U covers every node within directed distance d of some seed
(seeds cover themselves, distance 0). The objective is the covered count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graphs import DirectedGraph
from .metrics import _gather


@dataclass(frozen=True)
class SeedSet:
    """An ordered set of at most k_limit distinct node ids."""

    nodes: tuple[int, ...]
    k_limit: int

    def __post_init__(self):
        if self.k_limit < 1:
            raise ValueError(f"k_limit must be >= 1, got {self.k_limit}")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("seed set contains duplicate node ids")
        if len(self.nodes) > self.k_limit:
            raise ValueError(f"{len(self.nodes)} seeds exceed k_limit={self.k_limit}")
        if any(v < 0 for v in self.nodes):
            raise ValueError("seed ids must be nonnegative")

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class Solution:
    """A seed set together with its evaluated coverage objective at hop limit d."""

    seed_set: SeedSet
    objective_value: int
    d: int


def _seed_ids(seeds: SeedSet | Sequence[int] | Iterable[int], n: int) -> np.ndarray:
    nodes = seeds.nodes if isinstance(seeds, SeedSet) else tuple(seeds)
    ids = np.asarray(nodes, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexError("seed id outside graph node range")
    return ids


def influence_set(graph: DirectedGraph, seeds: SeedSet | Sequence[int], d: int) -> np.ndarray:
    """Sorted ids of all nodes within distance <= d of some seed.

    One multi-source BFS truncated at depth d. An empty seed set yields an
    empty array.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    n = graph.node_count
    ids = _seed_ids(seeds, n)
    if ids.size == 0:
        return np.empty(0, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    visited[ids] = True
    frontier = np.unique(ids)
    for _ in range(d):
        if frontier.size == 0:
            break
        neighbors = _gather(graph.out_indptr, graph.out_indices, frontier)
        neighbors = neighbors[~visited[neighbors]]
        if neighbors.size == 0:
            break
        frontier = np.unique(neighbors)
        visited[frontier] = True
    return np.flatnonzero(visited)


def objective(graph: DirectedGraph, seeds: SeedSet | Sequence[int], d: int) -> int:
    """Coverage objective: |influence_set(graph, seeds, d)|."""
    return int(influence_set(graph, seeds, d).size)


def evaluate_seed_set(graph: DirectedGraph, seeds: SeedSet, d: int) -> Solution:
    return Solution(seed_set=seeds, objective_value=objective(graph, seeds, d), d=d)


class InfluenceEvaluator:
    """Repeated objective evaluation against one (graph, d) pair.

    For graphs up to mask_node_limit nodes, the d-hop coverage ball of every
    node is precomputed as a bitmask, so one evaluation is a union plus a
    popcount. Larger graphs fall back to a multi-source BFS over a
    generation-stamped visited array (no per-call reallocation). Results are
    memoized per distinct seed set.
    """

    _MEMO_CAP = 200_000

    def __init__(self, graph: DirectedGraph, d: int, mask_node_limit: int = 4096):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        self.graph = graph
        self.d = d
        self._n = graph.node_count
        self._memo: dict[tuple[int, ...], int] = {}
        self._masks: list[int] | None = None
        if self._n <= mask_node_limit:
            self._masks = self._build_masks()
        else:
            self._stamp = np.zeros(self._n, dtype=np.int64)
            self._generation = 0

    def _build_masks(self) -> list[int]:
        n = self._n
        indptr, indices = self.graph.out_indptr, self.graph.out_indices
        balls = [1 << v for v in range(n)]
        neighbor_lists = [indices[indptr[v]:indptr[v + 1]].tolist() for v in range(n)]
        for _ in range(self.d):
            prev = balls
            balls = []
            for v in range(n):
                acc = 1 << v
                for u in neighbor_lists[v]:
                    acc |= prev[u]
                balls.append(acc)
        return balls

    def objective(self, seeds: SeedSet | Sequence[int]) -> int:
        nodes = seeds.nodes if isinstance(seeds, SeedSet) else tuple(int(v) for v in seeds)
        if not nodes:
            return 0
        key = tuple(sorted(nodes))
        if key[0] < 0 or key[-1] >= self._n:
            raise IndexError("seed id outside graph node range")
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        if self._masks is not None:
            union = 0
            for v in key:
                union |= self._masks[v]
            value = bin(union).count("1")
        else:
            value = self._stamped_count(np.asarray(key, dtype=np.int64))
        if len(self._memo) < self._MEMO_CAP:
            self._memo[key] = value
        return value

    def _stamped_count(self, ids: np.ndarray) -> int:
        if ids.min() < 0 or ids.max() >= self._n:
            raise IndexError("seed id outside graph node range")
        self._generation += 1
        gen = self._generation
        stamp = self._stamp
        stamp[ids] = gen
        frontier = ids
        count = int(ids.size)
        for _ in range(self.d):
            if frontier.size == 0:
                break
            neighbors = _gather(self.graph.out_indptr, self.graph.out_indices, frontier)
            neighbors = neighbors[stamp[neighbors] != gen]
            if neighbors.size == 0:
                break
            frontier = np.unique(neighbors)
            stamp[frontier] = gen
            count += int(frontier.size)
        return count

    def influence_members(self, seeds: SeedSet | Sequence[int]) -> np.ndarray:
        return influence_set(self.graph, seeds, self.d)
