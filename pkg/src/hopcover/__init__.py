"""hopcover: guidance-biased BRKGA for d-hop coverage maximization on digraphs."""

from .brkga import (Budget, BrkgaConfig, BrkgaResult, GuidanceMode, Individual,
                    crossover, decode, evolve_generation, init_population, run)
from .graphs import (DirectedGraph, LoadedEdgeList, generate_erdos_renyi,
                     load_edge_list, out_neighbors, write_edge_list)
from .guidance import (GuidanceParams, ProbabilityVector, node_probability,
                       probabilities_for_graph, random_params, uniform_guidance,
                       validate_params)
from .harness import (compare_experiment, direct_topk_solution, metric_pairs_export,
                      pearson, tune_params)
from .influence import InfluenceEvaluator, SeedSet, Solution, influence_set, objective
from .llm import LlmExchange, ModelConfig, estimate_tokens, execute, replay
from .metrics import (METRIC_NAMES, MetricsTable, compute_betweenness,
                      compute_closeness, compute_degree_metrics, compute_metrics,
                      compute_pagerank, normalize_metrics)
from .prompting import (ExampleFixture, PromptAblation, PromptDocument,
                        build_example_fixture, build_prompt, format_metric_row,
                        lint_prompt, load_example_fixture, parse_llm_answer)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
