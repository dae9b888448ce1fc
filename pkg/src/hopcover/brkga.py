"""Biased random-key genetic algorithm with a guidance-aware greedy decoder.

Individuals are vectors of keys in [0, 1], one per graph node. The decoder
ranks nodes by out_degree * key * guidance_probability and keeps the top k;
the coverage objective of that seed set is the individual's fitness. Each
generation copies the elite fraction unchanged, injects fresh random mutants,
and fills the remainder with biased crossover children; only mutants and
children are (re)evaluated.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import DirectedGraph
from .guidance import (GuidanceParams, ProbabilityVector, probabilities_for_graph,
                       random_params, uniform_guidance)
from .influence import InfluenceEvaluator, SeedSet, Solution
from .metrics import MetricsTable


class ConfigurationError(ValueError):
    """Raised for solver settings that cannot produce a valid run."""


@dataclass
class Individual:
    """One random-key vector with its lazily cached decoding."""

    keys: np.ndarray
    cached_fitness: int | None = None
    cached_solution: SeedSet | None = None


@dataclass(frozen=True)
class Budget:
    """Stop on whichever bound is reached first; at least one must be set."""

    max_seconds: float | None = None
    max_generations: int | None = None
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.max_seconds is None and self.max_generations is None \
                and self.max_evaluations is None:
            raise ConfigurationError("budget needs at least one bound")


@dataclass(frozen=True)
class BrkgaConfig:
    p_size: int = 100
    p_e: float = 0.15
    p_m: float = 0.15
    prob_elite: float = 0.7
    seed_flag: int = 1
    rng_seed: int = 0
    budget: Budget = field(default_factory=lambda: Budget(max_generations=100))

    def __post_init__(self):
        if self.p_size < 3:
            raise ConfigurationError(f"p_size must be >= 3, got {self.p_size}")
        if not 0.0 < self.p_e < 1.0 or not 0.0 < self.p_m < 1.0:
            raise ConfigurationError("p_e and p_m must lie in (0, 1)")
        if self.p_e + self.p_m >= 1.0:
            raise ConfigurationError("p_e + p_m must be < 1")
        if not 0.5 < self.prob_elite <= 1.0:
            raise ConfigurationError("prob_elite must lie in (0.5, 1]")
        if self.seed_flag not in (0, 1):
            raise ConfigurationError(f"seed_flag must be 0 or 1, got {self.seed_flag}")
        if self.elite_count + self.mutant_count >= self.p_size:
            raise ConfigurationError("elite plus mutant counts leave no room for crossover")

    @property
    def elite_count(self) -> int:
        return max(int(self.p_e * self.p_size), 1)

    @property
    def mutant_count(self) -> int:
        return max(int(self.p_m * self.p_size), 1)

    @property
    def crossover_count(self) -> int:
        return self.p_size - self.elite_count - self.mutant_count


@dataclass(frozen=True)
class GuidanceMode:
    """How decoder probabilities are sourced during a run.

    uniform        -- all-ones vector, the plain degree-times-key decoder.
    fixed          -- a precomputed ProbabilityVector (LLM, tuner, or file).
    static_random  -- one random alpha/beta draw per run.
    dynamic_random -- a fresh random alpha/beta draw every generation.
    """

    kind: str
    probabilities: ProbabilityVector | None = None
    seed: int | None = None
    metrics: MetricsTable | None = None

    @classmethod
    def uniform(cls) -> "GuidanceMode":
        return cls(kind="uniform")

    @classmethod
    def fixed(cls, probabilities: ProbabilityVector) -> "GuidanceMode":
        return cls(kind="fixed", probabilities=probabilities)

    @classmethod
    def static_random(cls, seed: int, metrics: MetricsTable) -> "GuidanceMode":
        return cls(kind="static_random", seed=seed, metrics=metrics)

    @classmethod
    def dynamic_random(cls, seed: int, metrics: MetricsTable) -> "GuidanceMode":
        return cls(kind="dynamic_random", seed=seed, metrics=metrics)


class _GuidanceState:
    """Per-run guidance bookkeeping: current vector plus the draw trace."""

    def __init__(self, mode: GuidanceMode, n: int):
        self.mode = mode
        self.trace: list[GuidanceParams] = []
        self._rng: np.random.Generator | None = None
        if mode.kind == "uniform":
            self.current = uniform_guidance(n)
        elif mode.kind == "fixed":
            if mode.probabilities is None:
                raise ConfigurationError("fixed guidance needs a probability vector")
            if mode.probabilities.node_count != n:
                raise ConfigurationError(
                    f"probability vector covers {mode.probabilities.node_count} nodes, "
                    f"graph has {n}")
            self.current = mode.probabilities
        elif mode.kind in ("static_random", "dynamic_random"):
            if mode.metrics is None or mode.seed is None:
                raise ConfigurationError(f"{mode.kind} guidance needs a seed and metrics")
            if mode.metrics.node_count != n:
                raise ConfigurationError("metrics table does not match the graph")
            self._rng = np.random.default_rng(mode.seed)
            self._redraw()
        else:
            raise ConfigurationError(f"unknown guidance kind {mode.kind!r}")

    def _redraw(self) -> None:
        params = random_params(self._rng)
        self.trace.append(params)
        self.current = probabilities_for_graph(self.mode.metrics, params)

    def next_generation(self) -> None:
        if self.mode.kind == "dynamic_random":
            self._redraw()


def init_population(config: BrkgaConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Initial key matrix; with seed_flag=1 the last row is the all-0.5 individual."""
    if config.seed_flag == 1:
        keys = np.empty((config.p_size, n))
        keys[:-1] = rng.random((config.p_size - 1, n))
        keys[-1] = 0.5
    else:
        keys = rng.random((config.p_size, n))
    return keys


def rank_nodes(values: np.ndarray) -> np.ndarray:
    """Node ids ordered by descending value, ties broken by smaller id."""
    return np.argsort(-np.atleast_2d(values), axis=1, kind="stable")


def decode_batch(keys: np.ndarray, out_degrees: np.ndarray,
                 probabilities: np.ndarray, k: int) -> np.ndarray:
    """Greedy decoding of a (batch, n) key matrix into (batch, k) seed ids."""
    phi = keys * out_degrees * probabilities
    return rank_nodes(phi)[:, :k]


def decode(individual: Individual, graph: DirectedGraph, k: int, d: int,
           probabilities: ProbabilityVector,
           evaluator: InfluenceEvaluator | None = None) -> Solution:
    """Decode one individual into a solution and cache the result on it."""
    n = graph.node_count
    if k > n:
        raise ConfigurationError(f"k={k} exceeds node count {n}")
    if individual.keys.shape != (n,):
        raise ConfigurationError("key vector length does not match the graph")
    if probabilities.node_count != n:
        raise ConfigurationError("probability vector does not match the graph")
    seeds = decode_batch(individual.keys[None, :], graph.out_degrees.astype(float),
                         probabilities.values, k)[0]
    seed_set = SeedSet(nodes=tuple(int(v) for v in seeds), k_limit=k)
    if evaluator is None:
        evaluator = InfluenceEvaluator(graph, d)
    value = evaluator.objective(seed_set)
    individual.cached_fitness = value
    individual.cached_solution = seed_set
    return Solution(seed_set=seed_set, objective_value=value, d=d)


def crossover(elite_parent: Individual, other_parent: Individual,
              prob_elite: float, rng: np.random.Generator) -> Individual:
    """Per-gene biased mix: take the elite parent's key with probability prob_elite."""
    if elite_parent.keys.shape != other_parent.keys.shape:
        raise ValueError("parents have different key lengths")
    take_elite = rng.random(elite_parent.keys.shape[0]) < prob_elite
    return Individual(keys=np.where(take_elite, elite_parent.keys, other_parent.keys))


@dataclass
class Population:
    """Key matrix plus per-individual fitness and decoded seed tuples."""

    keys: np.ndarray
    fitness: np.ndarray
    seed_sets: list[tuple[int, ...]]

    @property
    def size(self) -> int:
        return self.keys.shape[0]

    def best_index(self) -> int:
        return int(np.argmax(self.fitness))

    def order_by_fitness(self) -> np.ndarray:
        return np.argsort(-self.fitness, kind="stable")


def _evaluate_keys(keys: np.ndarray, graph: DirectedGraph, k: int,
                   probabilities: np.ndarray,
                   evaluator: InfluenceEvaluator) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    seeds = decode_batch(keys, graph.out_degrees.astype(float), probabilities, k)
    fitness = np.empty(keys.shape[0], dtype=np.int64)
    seed_sets: list[tuple[int, ...]] = []
    for i in range(keys.shape[0]):
        nodes = tuple(int(v) for v in seeds[i])
        fitness[i] = evaluator.objective(nodes)
        seed_sets.append(nodes)
    return fitness, seed_sets


def evolve_generation(population: Population, config: BrkgaConfig,
                      graph: DirectedGraph, k: int, d: int, mode: GuidanceMode,
                      rng: np.random.Generator, *,
                      evaluator: InfluenceEvaluator | None = None,
                      guidance: _GuidanceState | None = None) -> Population:
    """One generation: copy elites, inject mutants, breed children, evaluate the new.

    Draw order per generation is fixed (mutant keys, parent indices, crossover
    masks), so a pinned rng seed reproduces the population exactly. Dynamic
    guidance redraws its alpha/beta pair once, before any evaluation.
    """
    n = graph.node_count
    if evaluator is None:
        evaluator = InfluenceEvaluator(graph, d)
    if guidance is None:
        guidance = _GuidanceState(mode, n)
    guidance.next_generation()
    order = population.order_by_fitness()
    n_elite = config.elite_count
    n_mut = config.mutant_count
    n_cross = config.crossover_count
    elite_rows = order[:n_elite]
    mutant_keys = rng.random((n_mut, n))
    elite_pick = rng.integers(0, n_elite, size=n_cross)
    other_pick = rng.integers(n_elite, population.size, size=n_cross)
    masks = rng.random((n_cross, n)) < config.prob_elite
    elite_parent_keys = population.keys[order[elite_pick]]
    other_parent_keys = population.keys[order[other_pick]]
    child_keys = np.where(masks, elite_parent_keys, other_parent_keys)
    new_keys = np.vstack((mutant_keys, child_keys))
    new_fitness, new_sets = _evaluate_keys(new_keys, graph, k,
                                           guidance.current.values, evaluator)
    keys = np.vstack((population.keys[elite_rows], new_keys))
    fitness = np.concatenate((population.fitness[elite_rows], new_fitness))
    seed_sets = [population.seed_sets[i] for i in elite_rows] + new_sets
    return Population(keys=keys, fitness=fitness, seed_sets=seed_sets)


@dataclass(frozen=True)
class TrajectoryPoint:
    generation: int
    evaluations: int
    best_objective: int
    wall_seconds: float


@dataclass(frozen=True)
class BrkgaResult:
    best: Solution
    trajectory: tuple[TrajectoryPoint, ...]
    generations: int
    evaluations: int
    wall_seconds: float
    guidance_trace: tuple[GuidanceParams, ...]


def run(graph: DirectedGraph, k: int, d: int, mode: GuidanceMode,
        config: BrkgaConfig, *,
        evaluator: InfluenceEvaluator | None = None) -> BrkgaResult:
    """Evolve until the budget is exhausted; returns the best solution and trajectory.

    Fully deterministic for pinned seeds and a generation/evaluation budget:
    the trajectory and best solution are bit-identical across repeats.
    """
    n = graph.node_count
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ConfigurationError(f"k={k} exceeds node count {n}")
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    if evaluator is None:
        evaluator = InfluenceEvaluator(graph, d)
    budget = config.budget
    rng = np.random.default_rng(config.rng_seed)
    guidance = _GuidanceState(mode, n)
    started = time.perf_counter()

    keys = init_population(config, n, rng)
    fitness, seed_sets = _evaluate_keys(keys, graph, k, guidance.current.values,
                                        evaluator)
    population = Population(keys=keys, fitness=fitness, seed_sets=seed_sets)
    evaluations = config.p_size
    generation = 0
    trajectory = [TrajectoryPoint(0, evaluations, int(population.fitness.max()),
                                  time.perf_counter() - started)]

    per_generation = config.mutant_count + config.crossover_count
    while True:
        if budget.max_generations is not None and generation >= budget.max_generations:
            break
        if budget.max_evaluations is not None \
                and evaluations + per_generation > budget.max_evaluations:
            break
        if budget.max_seconds is not None \
                and time.perf_counter() - started >= budget.max_seconds:
            break
        population = evolve_generation(population, config, graph, k, d, mode, rng,
                                       evaluator=evaluator, guidance=guidance)
        generation += 1
        evaluations += per_generation
        trajectory.append(TrajectoryPoint(generation, evaluations,
                                          int(population.fitness.max()),
                                          time.perf_counter() - started))

    best_row = population.best_index()
    seed_set = SeedSet(nodes=population.seed_sets[best_row], k_limit=k)
    best = Solution(seed_set=seed_set,
                    objective_value=int(population.fitness[best_row]), d=d)
    return BrkgaResult(best=best, trajectory=tuple(trajectory),
                       generations=generation, evaluations=evaluations,
                       wall_seconds=time.perf_counter() - started,
                       guidance_trace=tuple(guidance.trace))


def write_trajectory_csv(trajectory: Sequence[TrajectoryPoint], target) -> None:
    """Deterministic trajectory CSV: generation, evaluations, best objective.

    Wall-clock stays out of the file so identical runs produce identical bytes;
    it remains available on the TrajectoryPoint records.
    """
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_trajectory_csv(trajectory, fh)
            return
    target.write("generation,evaluations,best_objective\n")
    for point in trajectory:
        target.write(f"{point.generation},{point.evaluations},{point.best_objective}\n")


def default_config(**overrides) -> BrkgaConfig:
    """BrkgaConfig with the package defaults, selectively overridden."""
    config = BrkgaConfig()
    return replace(config, **overrides) if overrides else config
