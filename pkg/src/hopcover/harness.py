"""Experiment orchestration: direct solutions, guided runs, tuning, correlations.

A declarative plan file drives grids of (instance, k, d, algorithm) cells;
every run lands in a CSV row that can be re-validated by re-evaluating its
stored seed set, and per-cell means are summarized alongside. A budgeted
random search stands in for external tuners over the same alpha/beta space.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import brkga
from .brkga import Budget, BrkgaConfig, GuidanceMode
from .graphs import DirectedGraph, load_edge_list
from .guidance import (GuidanceParams, load_params, load_probability_file,
                       probabilities_for_graph, random_params)
from .influence import InfluenceEvaluator, SeedSet, Solution
from .metrics import METRIC_NAMES, MetricsTable, compute_metrics

log = logging.getLogger(__name__)

ALGORITHM_LABELS = ("brkga", "brkga+llm", "brkga+static", "brkga+dynamic",
                    "brkga+tuned", "direct-topk", "out-degree")


class PlanError(ValueError):
    """Raised for malformed or incomplete experiment plans."""


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation is requested for a constant series."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation of two equal-length, non-constant series."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("series must be one-dimensional and equally long")
    if xa.size < 2:
        raise ValueError("need at least two points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float((dx * dy).sum() / (sx * sy))


@dataclass(frozen=True)
class CorrelationReport:
    series_a: str
    series_b: str
    rho: float
    n_points: int


def correlate(series_a_label: str, a: Sequence[float],
              series_b_label: str, b: Sequence[float]) -> CorrelationReport:
    return CorrelationReport(series_a=series_a_label, series_b=series_b_label,
                             rho=pearson(a, b), n_points=len(a))


def top_k_by_value(values: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k largest values, ties broken by smaller id."""
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")[:k]


def direct_topk_solution(values: Sequence[float], k: int, graph: DirectedGraph,
                         d: int, evaluator: InfluenceEvaluator | None = None) -> Solution:
    """Turn per-node scores directly into a solution: take the top k, evaluate."""
    arr = np.asarray(values, dtype=float)
    if arr.shape[0] != graph.node_count:
        raise ValueError("value vector length does not match the graph")
    if k > graph.node_count:
        raise brkga.ConfigurationError(f"k={k} exceeds node count {graph.node_count}")
    ids = top_k_by_value(arr, k)
    seed_set = SeedSet(nodes=tuple(int(v) for v in ids), k_limit=k)
    if evaluator is not None:
        value = evaluator.objective(seed_set)
    else:
        from .influence import objective
        value = objective(graph, seed_set, d)
    return Solution(seed_set=seed_set, objective_value=value, d=d)


@dataclass(frozen=True)
class TuneTrial:
    params: GuidanceParams
    score: float
    run_seeds: tuple[int, ...]


def tune_params(graph: DirectedGraph, metrics: MetricsTable, k: int, d: int,
                trial_budget: int, inner_budget: Budget, rng: np.random.Generator,
                config: BrkgaConfig | None = None,
                repeats: int = 1) -> tuple[GuidanceParams, list[TuneTrial]]:
    """Budgeted random search over alpha/beta space.

    Each trial draws candidate parameters, scores them by the mean best
    objective of `repeats` seeded solver runs under the inner budget, and the
    best-scoring candidate wins. Every trial is logged.
    """
    if trial_budget < 1:
        raise ValueError(f"trial_budget must be >= 1, got {trial_budget}")
    base = config or BrkgaConfig()
    evaluator = InfluenceEvaluator(graph, d)
    trials: list[TuneTrial] = []
    for _ in range(trial_budget):
        params = random_params(rng, source="tuner")
        probabilities = probabilities_for_graph(metrics, params)
        seeds = tuple(int(s) for s in rng.integers(0, 2**63 - 1, size=repeats))
        scores = []
        for seed in seeds:
            run_config = replace(base, rng_seed=seed, budget=inner_budget)
            result = brkga.run(graph, k, d, GuidanceMode.fixed(probabilities),
                               run_config, evaluator=evaluator)
            scores.append(result.best.objective_value)
        trials.append(TuneTrial(params=params, score=float(np.mean(scores)),
                                run_seeds=seeds))
    best = max(trials, key=lambda t: t.score)
    return best.params, trials


def write_tuning_log(trials: Sequence[TuneTrial], target: str | Path) -> None:
    with open(target, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "score"]
                        + [f"alpha_{i}" for i in range(1, 6)]
                        + [f"beta_{i}" for i in range(1, 6)] + ["run_seeds"])
        for i, trial in enumerate(trials):
            writer.writerow([i, trial.score]
                            + [repr(a) for a in trial.params.alpha]
                            + [repr(b) for b in trial.params.beta]
                            + [" ".join(str(s) for s in trial.run_seeds)])


def metric_pairs_export(metrics: MetricsTable) -> tuple[list[tuple[int, str, float]],
                                                        np.ndarray, list[str]]:
    """Long-format (node, metric, value) rows plus the 5x5 Pearson matrix.

    Constant columns leave their matrix cells as NaN and add an explanatory
    note; callers render those cells as empty.
    """
    rows = [(v, name, float(metrics.normalized[v, i]))
            for v in range(metrics.node_count)
            for i, name in enumerate(METRIC_NAMES)]
    matrix = np.full((5, 5), np.nan)
    notes: list[str] = []
    constant = [bool(np.all(metrics.normalized[:, i] == metrics.normalized[0, i]))
                for i in range(5)]
    for i, name in enumerate(METRIC_NAMES):
        if constant[i]:
            notes.append(f"column {name} is constant; correlations undefined")
    for i in range(5):
        for j in range(5):
            if not constant[i] and not constant[j]:
                matrix[i, j] = pearson(metrics.normalized[:, i], metrics.normalized[:, j])
    return rows, matrix, notes


def write_metric_pairs(metrics: MetricsTable, long_target: str | Path,
                       matrix_target: str | Path) -> None:
    rows, matrix, notes = metric_pairs_export(metrics)
    with open(long_target, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "metric", "value"])
        writer.writerows(rows)
    with open(matrix_target, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + list(METRIC_NAMES))
        for i, name in enumerate(METRIC_NAMES):
            writer.writerow([name] + ["" if np.isnan(matrix[i, j]) else repr(matrix[i, j])
                                      for j in range(5)])
        for note in notes:
            fh.write(f"# note: {note}\n")


@dataclass(frozen=True)
class RunRecord:
    """One experiment run; seed_nodes lets the row be re-validated later."""

    instance: str
    n: int
    arc_count: int
    k: int
    d: int
    algorithm: str
    guidance_source: str
    run_index: int
    rng_seed: int
    best_objective: int
    wall_seconds: float
    generations: int
    evaluations: int
    timestamp: str
    seed_nodes: tuple[int, ...]

    def key(self) -> tuple:
        return (self.instance, self.k, self.d, self.algorithm, self.run_index)


RECORD_COLUMNS = ["instance", "n", "arc_count", "k", "d", "algorithm",
                  "guidance_source", "run_index", "rng_seed", "best_objective",
                  "wall_seconds", "generations", "evaluations", "timestamp",
                  "seed_nodes"]


def _record_to_row(record: RunRecord) -> list:
    return [record.instance, record.n, record.arc_count, record.k, record.d,
            record.algorithm, record.guidance_source, record.run_index,
            record.rng_seed, record.best_objective, repr(record.wall_seconds),
            record.generations, record.evaluations, record.timestamp,
            " ".join(str(v) for v in record.seed_nodes)]


def _row_to_record(row: dict) -> RunRecord:
    return RunRecord(
        instance=row["instance"], n=int(row["n"]), arc_count=int(row["arc_count"]),
        k=int(row["k"]), d=int(row["d"]), algorithm=row["algorithm"],
        guidance_source=row["guidance_source"], run_index=int(row["run_index"]),
        rng_seed=int(row["rng_seed"]), best_objective=int(row["best_objective"]),
        wall_seconds=float(row["wall_seconds"]), generations=int(row["generations"]),
        evaluations=int(row["evaluations"]), timestamp=row["timestamp"],
        seed_nodes=tuple(int(v) for v in row["seed_nodes"].split()) if row["seed_nodes"] else ())


def read_records_csv(path: str | Path) -> list[RunRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [_row_to_record(row) for row in csv.DictReader(fh)]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary key parts; independent of run order."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class PlanInstance:
    name: str
    path: Path
    llm_params: Path | None = None
    tuned_params: Path | None = None
    prob_file: Path | None = None


@dataclass(frozen=True)
class ExperimentPlan:
    seed: int
    instances: tuple[PlanInstance, ...]
    k_values: tuple[int, ...]
    d_values: tuple[int, ...]
    algorithms: tuple[str, ...]
    runs_per_cell: int
    budget: Budget
    brkga: BrkgaConfig
    output: Path

    @property
    def summary_output(self) -> Path:
        return self.output.with_name(self.output.stem + "_summary.csv")


def load_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    base = path.parent

    def resolve(p):
        return None if p is None else (base / p)

    try:
        instances = tuple(
            PlanInstance(name=item["name"], path=base / item["path"],
                         llm_params=resolve(item.get("llm_params")),
                         tuned_params=resolve(item.get("tuned_params")),
                         prob_file=resolve(item.get("prob_file")))
            for item in payload["instances"])
        algorithms = tuple(payload["algorithms"])
        k_values = tuple(int(k) for k in payload["k_values"])
        d_values = tuple(int(d) for d in payload["d_values"])
        runs = int(payload["runs_per_cell"])
        budget_spec = payload["budget"]
        output = base / payload["output"]
        seed = int(payload.get("seed", 0))
    except KeyError as exc:
        raise PlanError(f"plan is missing required field {exc.args[0]!r}") from None
    for label in algorithms:
        if label not in ALGORITHM_LABELS:
            raise PlanError(f"unknown algorithm label {label!r}; "
                            f"choose from {ALGORITHM_LABELS}")
    if runs < 1:
        raise PlanError("runs_per_cell must be >= 1")
    budget = Budget(max_seconds=budget_spec.get("max_seconds"),
                    max_generations=budget_spec.get("max_generations"),
                    max_evaluations=budget_spec.get("max_evaluations"))
    solver_spec = payload.get("brkga", {})
    config = BrkgaConfig(
        p_size=int(solver_spec.get("p_size", 100)),
        p_e=float(solver_spec.get("p_e", 0.15)),
        p_m=float(solver_spec.get("p_m", 0.15)),
        prob_elite=float(solver_spec.get("prob_elite", 0.7)),
        seed_flag=int(solver_spec.get("seed_flag", 1)),
        budget=budget)
    needs_llm = {"brkga+llm", "direct-topk"}
    for inst in instances:
        if needs_llm & set(algorithms) and inst.llm_params is None and inst.prob_file is None:
            raise PlanError(f"instance {inst.name!r} needs llm_params or prob_file "
                            f"for {sorted(needs_llm & set(algorithms))}")
        if "brkga+tuned" in algorithms and inst.tuned_params is None:
            raise PlanError(f"instance {inst.name!r} needs tuned_params for brkga+tuned")
    return ExperimentPlan(seed=seed, instances=instances, k_values=k_values,
                          d_values=d_values, algorithms=algorithms,
                          runs_per_cell=runs, budget=budget, brkga=config,
                          output=output)


class _InstanceContext:
    """Loaded graph plus lazily computed metrics and guidance vectors."""

    def __init__(self, plan_instance: PlanInstance):
        self.spec = plan_instance
        loaded = load_edge_list(plan_instance.path)
        self.graph = loaded.graph
        self._metrics: MetricsTable | None = None
        self._evaluators: dict[int, InfluenceEvaluator] = {}

    @property
    def metrics(self) -> MetricsTable:
        if self._metrics is None:
            self._metrics = compute_metrics(self.graph)
        return self._metrics

    def evaluator(self, d: int) -> InfluenceEvaluator:
        if d not in self._evaluators:
            self._evaluators[d] = InfluenceEvaluator(self.graph, d)
        return self._evaluators[d]

    def guided_probabilities(self, which: str):
        if which == "llm" and self.spec.prob_file is not None:
            return load_probability_file(self.spec.prob_file), "probfile"
        path = self.spec.llm_params if which == "llm" else self.spec.tuned_params
        params = load_params(path)
        return probabilities_for_graph(self.metrics, params), params.source


def _execute_cell_run(ctx: _InstanceContext, label: str, k: int, d: int,
                      run_index: int, plan: ExperimentPlan) -> RunRecord:
    graph = ctx.graph
    evaluator = ctx.evaluator(d)
    seed = derive_seed(plan.seed, ctx.spec.name, k, d, label, run_index)
    started = time.perf_counter()
    generations = evaluations = 0
    if label == "out-degree":
        solution = direct_topk_solution(graph.out_degrees.astype(float), k, graph, d,
                                        evaluator)
        source = "out-degree"
        evaluations = 1
    elif label == "direct-topk":
        probabilities, source = ctx.guided_probabilities("llm")
        solution = direct_topk_solution(probabilities.values, k, graph, d, evaluator)
        evaluations = 1
    else:
        if label == "brkga":
            mode = GuidanceMode.uniform()
            source = "uniform"
        elif label == "brkga+llm":
            probabilities, source = ctx.guided_probabilities("llm")
            mode = GuidanceMode.fixed(probabilities)
        elif label == "brkga+tuned":
            probabilities, source = ctx.guided_probabilities("tuned")
            mode = GuidanceMode.fixed(probabilities)
        elif label == "brkga+static":
            mode = GuidanceMode.static_random(derive_seed(seed, "guidance"), ctx.metrics)
            source = "static-random"
        elif label == "brkga+dynamic":
            mode = GuidanceMode.dynamic_random(derive_seed(seed, "guidance"), ctx.metrics)
            source = "dynamic-random"
        else:
            raise PlanError(f"unknown algorithm label {label!r}")
        config = replace(plan.brkga, rng_seed=seed, budget=plan.budget)
        result = brkga.run(graph, k, d, mode, config, evaluator=evaluator)
        solution = result.best
        generations, evaluations = result.generations, result.evaluations
    return RunRecord(
        instance=ctx.spec.name, n=graph.node_count, arc_count=graph.arc_count,
        k=k, d=d, algorithm=label, guidance_source=source, run_index=run_index,
        rng_seed=seed, best_objective=solution.objective_value,
        wall_seconds=time.perf_counter() - started, generations=generations,
        evaluations=evaluations, timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
        seed_nodes=tuple(sorted(solution.seed_set.nodes)))


@dataclass(frozen=True)
class ExperimentOutcome:
    records: tuple[RunRecord, ...]
    summary_rows: tuple[tuple, ...]
    skipped_instances: tuple[str, ...]
    output: Path
    summary_output: Path

    @property
    def exit_code(self) -> int:
        return 2 if self.skipped_instances else 0


def compare_experiment(plan: ExperimentPlan | str | Path) -> ExperimentOutcome:
    """Execute every (instance, k, d, algorithm, run) cell of a plan.

    Existing rows in the output CSV are respected: completed (cell, run) keys
    are skipped, so interrupted plans resume where they stopped. Instances
    whose edge-list file is missing are skipped and reported via exit code 2.
    """
    if not isinstance(plan, ExperimentPlan):
        plan = load_plan(plan)
    done: dict[tuple, RunRecord] = {}
    if plan.output.exists():
        for record in read_records_csv(plan.output):
            done[record.key()] = record
    records: list[RunRecord] = list(done.values())
    skipped: list[str] = []
    new_records: list[RunRecord] = []
    for plan_instance in plan.instances:
        if not plan_instance.path.exists():
            log.error("instance file missing: %s", plan_instance.path)
            skipped.append(plan_instance.name)
            continue
        ctx = _InstanceContext(plan_instance)
        for d in plan.d_values:
            for k in plan.k_values:
                for label in plan.algorithms:
                    for run_index in range(plan.runs_per_cell):
                        key = (plan_instance.name, k, d, label, run_index)
                        if key in done:
                            continue
                        record = _execute_cell_run(ctx, label, k, d, run_index, plan)
                        new_records.append(record)
                        records.append(record)
    _write_records(plan.output, records)
    summary = summarize_records(records, plan)
    _write_summary(plan.summary_output, summary)
    return ExperimentOutcome(records=tuple(records), summary_rows=tuple(summary),
                             skipped_instances=tuple(skipped), output=plan.output,
                             summary_output=plan.summary_output)


def _write_records(path: Path, records: Sequence[RunRecord]) -> None:
    ordered = sorted(records, key=lambda r: (r.instance, r.d, r.k, r.algorithm,
                                             r.run_index))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for record in ordered:
            writer.writerow(_record_to_row(record))


def summarize_records(records: Sequence[RunRecord],
                      plan: ExperimentPlan) -> list[tuple]:
    """Per-cell mean objectives shaped like the comparison tables.

    One row per (instance, d); one column per (algorithm, k) pair.
    """
    header = ["instance", "d"]
    cells: dict[tuple, list[int]] = {}
    for record in records:
        cells.setdefault((record.instance, record.d, record.algorithm, record.k),
                         []).append(record.best_objective)
    for k in plan.k_values:
        for label in plan.algorithms:
            header.append(f"{label}_k{k}")
    rows: list[tuple] = [tuple(header)]
    seen_instances = [inst.name for inst in plan.instances
                      if any(r.instance == inst.name for r in records)]
    for name in seen_instances:
        for d in plan.d_values:
            row: list = [name, d]
            for k in plan.k_values:
                for label in plan.algorithms:
                    values = cells.get((name, d, label, k))
                    row.append(float(np.mean(values)) if values else "")
            rows.append(tuple(row))
    return rows


def _write_summary(path: Path, rows: Sequence[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)
