"""Structured prompt construction and answer parsing for the guidance request.

The prompt is four tagged sections: a problem statement, a worked example
graph (per-node metrics plus a known good solution), the evaluation graph's
metrics, and the answering rules that define the ten requested parameters.
Metric values are rendered in scientific notation to keep the token count
down; answers come back as labeled alpha/beta assignments or a JSON object.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .brkga import Budget, BrkgaConfig, GuidanceMode, run
from .graphs import DirectedGraph, generate_erdos_renyi
from .metrics import METRIC_NAMES, MetricsTable, compute_metrics

TAGS = ("PROBLEM", "EXAMPLE GRAPH", "EVALUATION GRAPH", "RULES ANSWERING",
        "DATA", "ANSWER")

EXAMPLE_GRAPH_NODES = 100
EXAMPLE_GRAPH_ARC_PROBABILITY = 0.05
EXAMPLE_GRAPH_SEED = 101
EXAMPLE_SOLUTION_K = 32
EXAMPLE_SOLUTION_D = 1
EXAMPLE_BRKGA_SEED = 7
EXAMPLE_BRKGA_GENERATIONS = 150

_FIXTURE_RESOURCE = "example_fixture.json"


class PromptStructureError(ValueError):
    """Raised when a prompt cannot be built or fails the tag linter."""


class AnswerParseError(ValueError):
    """Raised when an answer does not contain ten parameter values."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class AnswerAmbiguityError(AnswerParseError):
    """Raised when the same parameter label appears with conflicting values."""


@dataclass(frozen=True)
class PromptAblation:
    """Switches for the prompt-content experiments."""

    include_example: bool = True
    scientific_notation: bool = True
    include_rules: bool = True


@dataclass(frozen=True)
class PromptDocument:
    problem_text: str
    example_block: str
    evaluation_block: str
    rules_text: str
    rendered: str


@dataclass(frozen=True)
class ExampleFixture:
    """The pinned example graph, its metrics, and a precomputed solution.

    Serialized once as a golden JSON file so every prompt embeds byte-identical
    example data.
    """

    graph: DirectedGraph
    metrics: MetricsTable
    solution: tuple[int, ...]
    k_example: int = EXAMPLE_SOLUTION_K
    d_example: int = EXAMPLE_SOLUTION_D
    graph_seed: int = EXAMPLE_GRAPH_SEED
    solver_seed: int = EXAMPLE_BRKGA_SEED

    def to_json(self) -> str:
        payload = {
            "graph_seed": self.graph_seed,
            "solver_seed": self.solver_seed,
            "node_count": self.graph.node_count,
            "arc_probability": EXAMPLE_GRAPH_ARC_PROBABILITY,
            "arcs": [[int(u), int(v)] for u, v in self.graph.arcs],
            "metrics_raw": [[float(x) for x in row] for row in self.metrics.raw],
            "metrics_norm": [[float(x) for x in row] for row in self.metrics.normalized],
            "solution": [int(v) for v in self.solution],
            "k_example": self.k_example,
            "d_example": self.d_example,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExampleFixture":
        payload = json.loads(text)
        graph = DirectedGraph(payload["node_count"], payload["arcs"])
        metrics = MetricsTable(raw=np.asarray(payload["metrics_raw"]),
                               normalized=np.asarray(payload["metrics_norm"]))
        return cls(graph=graph, metrics=metrics,
                   solution=tuple(payload["solution"]),
                   k_example=payload["k_example"], d_example=payload["d_example"],
                   graph_seed=payload["graph_seed"], solver_seed=payload["solver_seed"])


def build_example_fixture(generations: int = EXAMPLE_BRKGA_GENERATIONS,
                          rng_seed: int = EXAMPLE_BRKGA_SEED) -> ExampleFixture:
    """Regenerate the example fixture from its pinned seeds.

    The example graph is ER(100, 0.05); its reference solution comes from the
    plain solver (uniform guidance) at k=32, d=1 under a generation budget.
    """
    graph = generate_erdos_renyi(EXAMPLE_GRAPH_NODES, EXAMPLE_GRAPH_ARC_PROBABILITY,
                                 EXAMPLE_GRAPH_SEED)
    metrics = compute_metrics(graph)
    config = BrkgaConfig(rng_seed=rng_seed,
                         budget=Budget(max_generations=generations))
    result = run(graph, EXAMPLE_SOLUTION_K, EXAMPLE_SOLUTION_D,
                 GuidanceMode.uniform(), config)
    return ExampleFixture(graph=graph, metrics=metrics,
                          solution=result.best.seed_set.nodes,
                          solver_seed=rng_seed)


def load_example_fixture() -> ExampleFixture:
    """Load the committed golden fixture shipped with the package."""
    text = resources.files("hopcover.data").joinpath(_FIXTURE_RESOURCE).read_text("utf-8")
    return ExampleFixture.from_json(text)


def save_example_fixture(fixture: ExampleFixture, target: str | Path) -> None:
    Path(target).write_text(fixture.to_json(), encoding="utf-8")


def format_metric_row(node_id: int, values, scientific: bool = True) -> str:
    """One data line: "id,v1,v2,v3,v4,v5" with fixed-width significands."""
    if scientific:
        rendered = ",".join(f"{float(v):.3e}" for v in values)
    else:
        rendered = ",".join(f"{float(v):.6f}" for v in values)
    return f"{node_id},{rendered}"


def _data_lines(metrics: MetricsTable, scientific: bool) -> str:
    return "\n".join(format_metric_row(v, metrics.normalized[v], scientific)
                     for v in range(metrics.node_count))


def _problem_text(k: int, d: int) -> str:
    return (
        "Consider a directed graph $G=(V,A)$. For $u,v \\in V$ let $dist(u,v)$ be "
        "the number of arcs on a shortest directed path from $u$ to $v$, with "
        "$dist(u,u)=0$. A node $u$ covers every node $v$ with $dist(u,v) \\leq d$. "
        "A set $U \\subseteq V$ covers the union of what its members cover. The "
        "task is: $\\max_{U \\subseteq V} |\\{v : dist(u,v) \\leq d "
        "\\text{ for some } u \\in U\\}|$ subject to $|U| \\leq k$, "
        f"here with $k={k}$ and $d={d}$."
    )


def _rules_text(k: int, d: int) -> str:
    metric_list = ", ".join(METRIC_NAMES)
    return (
        f"Each data row above is: node id, then {metric_list}, all normalized "
        "to [0,1]. Study how the metric values relate to good solutions and "
        "answer with two sets of five parameters, one per metric in the column "
        "order above:\n"
        "- alpha_1..alpha_5: importance weights; each strictly between 0 and 1 "
        "and the five must sum to 1.\n"
        "- beta_1..beta_5: correction values, each strictly between 0 and 1, "
        "independent of each other; beta_i marks where the best nodes sit in "
        "metric i's normalized range.\n"
        "The probability that node v_j belongs to an optimal solution for "
        f"k={k}, d={d} will be computed as sigmoid(sum over i of "
        "alpha_i * (1 - (beta_i - m_ji))) where m_ji is metric i of node v_j.\n"
        "Reply with ten labeled assignments, one per line, exactly like:\n"
        "alpha_1 = 0.20\n"
        "...\n"
        "beta_5 = 0.50"
    )


def _example_block(fixture: ExampleFixture, scientific: bool) -> str:
    solution_text = ",".join(str(v) for v in fixture.solution)
    return (
        f"[EXAMPLE GRAPH]\n"
        f"A graph with {fixture.graph.node_count} nodes: per-node metrics, then a "
        f"high-quality solution for k={fixture.k_example} and d={fixture.d_example}.\n"
        f"[DATA]\n{_data_lines(fixture.metrics, scientific)}\n[/DATA]\n"
        f"[ANSWER]\n{solution_text}\n[/ANSWER]\n"
        f"[/EXAMPLE GRAPH]"
    )


def build_prompt(example: ExampleFixture, eval_metrics: MetricsTable, k: int, d: int,
                 ablation: PromptAblation = PromptAblation()) -> PromptDocument:
    """Assemble the four-tag prompt for an evaluation graph.

    The example section can be omitted (content-removal experiment); the rules
    section is the answer contract and cannot be.
    """
    if not ablation.include_rules:
        raise PromptStructureError("the answering rules section is mandatory")
    if eval_metrics.node_count < 1:
        raise PromptStructureError("evaluation metrics are empty")
    if k < 1 or d < 1:
        raise PromptStructureError("k and d must be >= 1")
    problem = _problem_text(k, d)
    example_block = _example_block(example, ablation.scientific_notation) \
        if ablation.include_example else ""
    evaluation_block = (
        f"[EVALUATION GRAPH]\n"
        f"The graph to solve, {eval_metrics.node_count} nodes, same metric columns.\n"
        f"[DATA]\n{_data_lines(eval_metrics, ablation.scientific_notation)}\n[/DATA]\n"
        f"[/EVALUATION GRAPH]"
    )
    rules = _rules_text(k, d)
    sections = [f"[PROBLEM]\n{problem}\n[/PROBLEM]"]
    if example_block:
        sections.append(example_block)
    sections.append(evaluation_block)
    sections.append(f"[RULES ANSWERING]\n{rules}\n[/RULES ANSWERING]")
    rendered = "\n".join(sections) + "\n"
    issues = lint_prompt(rendered, expect_example=ablation.include_example)
    if issues:
        raise PromptStructureError("; ".join(issues))
    return PromptDocument(problem_text=problem, example_block=example_block,
                          evaluation_block=evaluation_block, rules_text=rules,
                          rendered=rendered)


_TAG_PATTERN = re.compile(r"\[(/?)(" + "|".join(re.escape(t) for t in TAGS) + r")\]")


def lint_prompt(rendered: str, expect_example: bool = True) -> list[str]:
    """Structural checks on a rendered prompt; returns a list of problems.

    Verifies that every tag opens and closes exactly as often as expected,
    that [ANSWER] only appears inside the example section, and that nesting
    is well formed.
    """
    issues: list[str] = []
    opens: dict[str, int] = {t: 0 for t in TAGS}
    closes: dict[str, int] = {t: 0 for t in TAGS}
    stack: list[str] = []
    answer_context: list[str] = []
    for match in _TAG_PATTERN.finditer(rendered):
        closing, name = match.group(1) == "/", match.group(2)
        if closing:
            closes[name] += 1
            if not stack or stack[-1] != name:
                issues.append(f"unbalanced closing tag [{name}]")
            else:
                stack.pop()
        else:
            opens[name] += 1
            if name == "ANSWER":
                answer_context = list(stack)
            stack.append(name)
    if stack:
        issues.append(f"unclosed tags: {stack}")
    expected_once = ["PROBLEM", "EVALUATION GRAPH", "RULES ANSWERING"]
    if expect_example:
        expected_once.append("EXAMPLE GRAPH")
    for name in expected_once:
        if opens[name] != 1 or closes[name] != 1:
            issues.append(f"[{name}] must open and close exactly once")
    if not expect_example and (opens["EXAMPLE GRAPH"] or opens["ANSWER"]):
        issues.append("example content present despite omission flag")
    expected_data = 2 if expect_example else 1
    if opens["DATA"] != expected_data or closes["DATA"] != expected_data:
        issues.append(f"[DATA] must appear exactly {expected_data} time(s)")
    if expect_example:
        if opens["ANSWER"] != 1 or closes["ANSWER"] != 1:
            issues.append("[ANSWER] must open and close exactly once")
        elif answer_context and answer_context[0] != "EXAMPLE GRAPH":
            issues.append("[ANSWER] must be nested inside [EXAMPLE GRAPH]")
    for name in TAGS:
        if opens[name] != closes[name]:
            issues.append(f"[{name}] open/close counts differ")
    return issues


_NUMBER = r"([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)"
_LABELED = re.compile(r"\b(alpha|beta)[\s_]*([1-5])\b\s*[:=]\s*" + _NUMBER,
                      re.IGNORECASE)


def parse_llm_answer(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Extract the ten raw parameter values from an answer.

    Labeled assignments (alpha_1 = 0.2 ... beta_5 = 0.5, tolerant of case,
    separators, and surrounding prose) take precedence; a JSON object with
    "alpha"/"beta" arrays of five is the fallback. Raises AnswerParseError
    (carrying the raw text) when fewer than ten values can be recovered.
    """
    labeled: dict[str, float] = {}
    for match in _LABELED.finditer(text):
        label = f"{match.group(1).lower()}_{match.group(2)}"
        value = float(match.group(3))
        if label in labeled and abs(labeled[label] - value) > 1e-12:
            raise AnswerAmbiguityError(
                f"label {label} appears with conflicting values "
                f"{labeled[label]} and {value}", text)
        labeled[label] = value
    wanted = [f"{name}_{i}" for name in ("alpha", "beta") for i in range(1, 6)]
    if all(label in labeled for label in wanted):
        alpha = tuple(labeled[f"alpha_{i}"] for i in range(1, 6))
        beta = tuple(labeled[f"beta_{i}"] for i in range(1, 6))
        return alpha, beta
    parsed = _find_json_params(text)
    if parsed is not None:
        return parsed
    raise AnswerParseError(
        f"found {len(labeled)} of 10 labeled values and no parameter JSON", text)


def _find_json_params(text: str) -> tuple[tuple[float, ...], tuple[float, ...]] | None:
    decoder = json.JSONDecoder()
    for start in range(len(text)):
        if text[start] != "{":
            continue
        try:
            payload, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
        if isinstance(payload, dict) and "alpha" in payload and "beta" in payload:
            alpha, beta = payload["alpha"], payload["beta"]
            if isinstance(alpha, list) and isinstance(beta, list) \
                    and len(alpha) == 5 and len(beta) == 5:
                return (tuple(float(a) for a in alpha),
                        tuple(float(b) for b in beta))
    return None


def render_params_as_prose(alpha, beta) -> str:
    """Labeled-assignment rendering; parse_llm_answer inverts it exactly."""
    lines = [f"alpha_{i} = {float(a)!r}" for i, a in enumerate(alpha, start=1)]
    lines += [f"beta_{i} = {float(b)!r}" for i, b in enumerate(beta, start=1)]
    return "\n".join(lines)
