"""Command-line interface: metrics, evaluate, prompt, ask, solve, tune, compare."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import brkga, guidance, harness, llm, metrics as metrics_mod, prompting
from .graphs import load_edge_list, write_id_map_csv
from .influence import InfluenceEvaluator, SeedSet


def _load_graph(path: str):
    return load_edge_list(path)


def _metrics_for(loaded, args) -> metrics_mod.MetricsTable:
    if getattr(args, "metrics_csv", None):
        table = metrics_mod.read_metrics_csv(args.metrics_csv)
        if table.node_count != loaded.graph.node_count:
            raise SystemExit("metrics CSV row count does not match the graph")
        return table
    return metrics_mod.compute_metrics(
        loaded.graph, closeness_direction=getattr(args, "closeness_direction", "out"))


def cmd_metrics(args) -> int:
    loaded = _load_graph(args.graph)
    table = metrics_mod.compute_metrics(loaded.graph,
                                        closeness_direction=args.closeness_direction)
    metrics_mod.write_metrics_csv(table, args.out)
    if args.id_map:
        write_id_map_csv(loaded.id_map, args.id_map)
    print(f"wrote metrics for {table.node_count} nodes to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    loaded = _load_graph(args.graph)
    with open(args.seeds, "r", encoding="utf-8") as fh:
        original_ids = [int(line.strip()) for line in fh if line.strip()]
    dense = loaded.to_dense(original_ids)
    seed_set = SeedSet(nodes=tuple(dense), k_limit=max(len(dense), 1))
    from .influence import influence_set
    covered = influence_set(loaded.graph, seed_set, args.d)
    print(f"objective {covered.size}")
    print(f"covered {covered.size} of {loaded.graph.node_count} nodes")
    return 0


def _build_prompt(args) -> prompting.PromptDocument:
    loaded = _load_graph(args.graph)
    table = _metrics_for(loaded, args)
    fixture = prompting.load_example_fixture()
    ablation = prompting.PromptAblation(include_example=not args.no_example,
                                        scientific_notation=not args.plain_notation)
    return prompting.build_prompt(fixture, table, args.k, args.d, ablation)


def cmd_prompt(args) -> int:
    document = _build_prompt(args)
    Path(args.out).write_text(document.rendered, encoding="utf-8")
    print(f"wrote prompt to {args.out}")
    print(f"estimated_tokens {llm.estimate_tokens(document.rendered)}")
    return 0


def cmd_ask(args) -> int:
    document = _build_prompt(args)
    if args.replay:
        response = llm.replay(args.replay, document)
    else:
        config = llm.ModelConfig(provider=args.provider, model_name=args.model,
                                 temperature=args.temperature,
                                 max_output_tokens=args.max_tokens,
                                 context_window=args.window,
                                 window_margin=args.window_margin,
                                 api_key_env=args.api_key_env,
                                 base_url=args.base_url, timeout=args.timeout,
                                 retries=args.retries)
        response = llm.execute(document, config, exchange_log=args.record_log)
    alpha, beta = prompting.parse_llm_answer(response)
    params = guidance.validate_params(alpha, beta, source="llm",
                                      model=None if args.replay else args.model)
    guidance.save_params(params, args.out)
    print(f"wrote guidance parameters to {args.out}")
    return 0


def _guidance_mode(args, loaded, table_getter) -> brkga.GuidanceMode:
    spec = args.guidance
    n = loaded.graph.node_count
    if spec == "uniform":
        return brkga.GuidanceMode.uniform()
    if spec == "static-random":
        return brkga.GuidanceMode.static_random(args.guidance_seed, table_getter())
    if spec == "dynamic-random":
        return brkga.GuidanceMode.dynamic_random(args.guidance_seed, table_getter())
    if spec.startswith("file:"):
        params = guidance.load_params(spec[len("file:"):])
        return brkga.GuidanceMode.fixed(
            guidance.probabilities_for_graph(table_getter(), params))
    if spec.startswith("probfile:"):
        vector = guidance.load_probability_file(spec[len("probfile:"):])
        if vector.node_count != n:
            raise SystemExit("probability file does not match the graph size")
        return brkga.GuidanceMode.fixed(vector)
    raise SystemExit(f"unknown guidance spec {spec!r}")


def cmd_solve(args) -> int:
    loaded = _load_graph(args.graph)
    table_cache = []

    def table_getter():
        if not table_cache:
            table_cache.append(_metrics_for(loaded, args))
        return table_cache[0]

    if args.time_limit is None and args.max_generations is None \
            and args.max_evaluations is None:
        raise SystemExit("provide --time-limit, --max-generations, or --max-evaluations")
    budget = brkga.Budget(max_seconds=args.time_limit,
                          max_generations=args.max_generations,
                          max_evaluations=args.max_evaluations)
    evaluator = InfluenceEvaluator(loaded.graph, args.d)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for run_index in range(args.runs):
        config = brkga.BrkgaConfig(p_size=args.pop_size, p_e=args.elite_frac,
                                   p_m=args.mutant_frac, prob_elite=args.prob_elite,
                                   seed_flag=args.seed_flag,
                                   rng_seed=args.rng_seed + run_index, budget=budget)
        mode = _guidance_mode(args, loaded, table_getter)
        result = brkga.run(loaded.graph, args.k, args.d, mode, config,
                           evaluator=evaluator)
        trajectory_path = Path(f"{prefix}_run{run_index}_trajectory.csv")
        brkga.write_trajectory_csv(result.trajectory, trajectory_path)
        solution_path = Path(f"{prefix}_run{run_index}_solution.txt")
        with open(solution_path, "w", encoding="utf-8") as fh:
            fh.write(f"# objective {result.best.objective_value}\n")
            for node in sorted(result.best.seed_set.nodes):
                fh.write(f"{int(loaded.id_map[node])}\n")
        print(f"run {run_index}: objective {result.best.objective_value} "
              f"generations {result.generations} evaluations {result.evaluations} "
              f"seconds {result.wall_seconds:.2f}")
    return 0


def cmd_tune(args) -> int:
    loaded = _load_graph(args.graph)
    table = _metrics_for(loaded, args)
    inner = brkga.Budget(max_generations=args.inner_generations)
    rng = np.random.default_rng(args.seed)
    config = brkga.BrkgaConfig(p_size=args.pop_size)
    params, trials = harness.tune_params(loaded.graph, table, args.k, args.d,
                                         trial_budget=args.trials,
                                         inner_budget=inner, rng=rng,
                                         config=config, repeats=args.repeats)
    guidance.save_params(params, args.out)
    if args.log:
        harness.write_tuning_log(trials, args.log)
    best = max(t.score for t in trials)
    print(f"tuned parameters written to {args.out} (best score {best})")
    return 0


def cmd_compare(args) -> int:
    outcome = harness.compare_experiment(args.plan)
    print(f"wrote {len(outcome.records)} run records to {outcome.output}")
    print(f"wrote summary to {outcome.summary_output}")
    for name in outcome.skipped_instances:
        print(f"skipped missing instance: {name}", file=sys.stderr)
    return outcome.exit_code


def cmd_export_metrics(args) -> int:
    if args.metrics_csv:
        table = metrics_mod.read_metrics_csv(args.metrics_csv)
    else:
        loaded = _load_graph(args.graph)
        table = metrics_mod.compute_metrics(loaded.graph)
    long_path = Path(f"{args.out_prefix}_long.csv")
    matrix_path = Path(f"{args.out_prefix}_matrix.csv")
    harness.write_metric_pairs(table, long_path, matrix_path)
    print(f"wrote {long_path} and {matrix_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hopcover",
        description="Guidance-biased BRKGA for d-hop coverage maximization")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="compute per-node centrality metrics")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--id-map", default=None)
    p.add_argument("--closeness-direction", choices=("out", "in"), default="out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evaluate", help="evaluate a seed list's coverage")
    p.add_argument("--graph", required=True)
    p.add_argument("--seeds", required=True, help="file with one original node id per line")
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_evaluate)

    def prompt_arguments(p):
        p.add_argument("--graph", required=True)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--metrics-csv", default=None)
        p.add_argument("--closeness-direction", choices=("out", "in"), default="out")
        p.add_argument("--no-example", action="store_true")
        p.add_argument("--plain-notation", action="store_true")

    p = sub.add_parser("prompt", help="render the guidance prompt for a graph")
    prompt_arguments(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("ask", help="run the prompt against a provider and save params")
    prompt_arguments(p)
    p.add_argument("--provider", choices=llm.PROVIDERS, default="openrouter-compatible")
    p.add_argument("--model", default="openai/gpt-4o")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-tokens", type=int, default=1000)
    p.add_argument("--window", type=int, default=128000)
    p.add_argument("--window-margin", type=float, default=0.95)
    p.add_argument("--api-key-env", default="HOPCOVER_API_KEY")
    p.add_argument("--base-url", default="")
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--record-log", default=None, help="append exchanges to this JSONL file")
    p.add_argument("--replay", default=None, help="answer from this exchange log, offline")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("solve", help="run the solver")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--guidance", default="uniform",
                   help="uniform | file:<params.json> | probfile:<probs.csv> | "
                        "static-random | dynamic-random")
    p.add_argument("--guidance-seed", type=int, default=0)
    p.add_argument("--metrics-csv", default=None)
    p.add_argument("--closeness-direction", choices=("out", "in"), default="out")
    p.add_argument("--pop-size", type=int, default=100)
    p.add_argument("--elite-frac", type=float, default=0.15)
    p.add_argument("--mutant-frac", type=float, default=0.15)
    p.add_argument("--prob-elite", type=float, default=0.7)
    p.add_argument("--seed-flag", type=int, choices=(0, 1), default=1)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--max-generations", type=int, default=None)
    p.add_argument("--max-evaluations", type=int, default=None)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tune", help="random-search alpha/beta tuning")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--inner-generations", type=int, default=50)
    p.add_argument("--pop-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metrics-csv", default=None)
    p.add_argument("--closeness-direction", choices=("out", "in"), default="out")
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compare", help="run an experiment plan")
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-metrics", help="long-format metric CSV plus Pearson matrix")
    p.add_argument("--graph", default=None)
    p.add_argument("--metrics-csv", default=None)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_export_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "export-metrics" and not (args.graph or args.metrics_csv):
        print("export-metrics needs --graph or --metrics-csv", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
