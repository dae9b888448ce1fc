"""Alpha/beta parameter sets and the per-node selection probabilities they induce.

Ten parameters steer the solver: five importance weights (alpha, summing to
one) and five per-metric correction values (beta), one pair per metric column.
A node's probability is sigmoid(sum_i alpha_i * (1 - (beta_i - m_i))) over its
normalized metric row m.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import MetricsTable

ALPHA_SUM_TOLERANCE = 0.05
PARAM_SOURCES = ("llm", "tuner", "random", "file")


class GuidanceValidationError(ValueError):
    """Raised when raw alpha/beta values violate their range or sum contract."""


@dataclass(frozen=True)
class GuidanceParams:
    """Validated alpha/beta ten-tuple, ordered as METRIC_NAMES."""

    alpha: tuple[float, float, float, float, float]
    beta: tuple[float, float, float, float, float]
    source: str = "file"
    model: str | None = None

    def __post_init__(self):
        if len(self.alpha) != 5 or len(self.beta) != 5:
            raise GuidanceValidationError("alpha and beta must each hold 5 values")
        for name, values in (("alpha", self.alpha), ("beta", self.beta)):
            for i, value in enumerate(values, start=1):
                if not 0.0 < value < 1.0:
                    raise GuidanceValidationError(
                        f"{name}_{i}={value!r} outside the open interval (0, 1)")
        if abs(sum(self.alpha) - 1.0) > 1e-6:
            raise GuidanceValidationError(
                f"alpha values sum to {sum(self.alpha)!r}, expected 1")

    def as_dict(self) -> dict:
        payload = {"alpha": list(self.alpha), "beta": list(self.beta),
                   "source": self.source}
        if self.model is not None:
            payload["model"] = self.model
        return payload


@dataclass(frozen=True)
class ProbabilityVector:
    """Per-node selection probabilities plus a fingerprint of their origin.

    The fingerprint (node count, metrics checksum) lets the decoder reject
    vectors computed for a different graph; checksum None means the vector is
    metric-independent (uniform or file-loaded).
    """

    values: np.ndarray
    node_count: int
    metrics_checksum: str | None = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.node_count:
            raise ValueError("probability vector shape does not match node count")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def validate_params(raw_alpha: Sequence[float], raw_beta: Sequence[float],
                    source: str = "file", model: str | None = None) -> GuidanceParams:
    """Check ranges, allow an alpha-sum drift up to 0.05, renormalize to sum 1.

    Values outside (0, 1) or a larger sum drift raise GuidanceValidationError
    naming the offending parameter; nothing is clamped silently.
    """
    alpha = tuple(float(a) for a in raw_alpha)
    beta = tuple(float(b) for b in raw_beta)
    if len(alpha) != 5 or len(beta) != 5:
        raise GuidanceValidationError(
            f"expected 5 alpha and 5 beta values, got {len(alpha)} and {len(beta)}")
    for name, values in (("alpha", alpha), ("beta", beta)):
        for i, value in enumerate(values, start=1):
            if not math.isfinite(value):
                raise GuidanceValidationError(f"{name}_{i} is not finite")
            if not 0.0 < value < 1.0:
                raise GuidanceValidationError(
                    f"{name}_{i}={value} outside the open interval (0, 1)")
    total = sum(alpha)
    if abs(total - 1.0) > ALPHA_SUM_TOLERANCE:
        raise GuidanceValidationError(
            f"alpha values sum to {total}, allowed drift is {ALPHA_SUM_TOLERANCE}")
    alpha = tuple(a / total for a in alpha)
    return GuidanceParams(alpha=alpha, beta=beta, source=source, model=model)


def node_probability(metric_row: Sequence[float], params: GuidanceParams) -> float:
    """sigmoid(sum_i alpha_i * (1 - (beta_i - m_i))) for one metric row."""
    total = 0.0
    for alpha, beta, m in zip(params.alpha, params.beta, metric_row):
        total += alpha * (1.0 - (beta - m))
    return 1.0 / (1.0 + math.exp(-total))


def probabilities_for_graph(metrics: MetricsTable, params: GuidanceParams) -> ProbabilityVector:
    """node_probability applied to every row of the normalized metric table."""
    m = metrics.normalized
    alpha = np.asarray(params.alpha)
    beta = np.asarray(params.beta)
    z = (alpha * (1.0 - (beta - m))).sum(axis=1)
    values = 1.0 / (1.0 + np.exp(-z))
    return ProbabilityVector(values=values, node_count=metrics.node_count,
                             metrics_checksum=metrics.checksum())


def random_params(rng: np.random.Generator, source: str = "random") -> GuidanceParams:
    """Betas uniform in (0, 1); alphas uniform draws normalized to sum 1.

    Alphas are drawn before betas; the output always passes validate_params.
    """
    alpha_raw = _positive_uniform(rng, 5)
    beta = _positive_uniform(rng, 5)
    total = float(alpha_raw.sum())
    alpha = tuple(float(a) / total for a in alpha_raw)
    return GuidanceParams(alpha=alpha, beta=tuple(float(b) for b in beta), source=source)


def _positive_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    values = rng.random(size)
    while np.any((values <= 0.0) | (values >= 1.0)):  # rejection; zero is possible
        redraw = (values <= 0.0) | (values >= 1.0)
        values[redraw] = rng.random(int(redraw.sum()))
    return values


def uniform_guidance(n: int) -> ProbabilityVector:
    """Neutral guidance: all entries 1, leaving the decoder's ranking untouched."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return ProbabilityVector(values=np.ones(n), node_count=n, metrics_checksum=None)


def probabilities_from_values(values: Sequence[float] | np.ndarray) -> ProbabilityVector:
    """Wrap externally supplied per-node values (e.g. a probability file import)."""
    arr = np.asarray(values, dtype=float)
    return ProbabilityVector(values=arr, node_count=arr.shape[0], metrics_checksum=None)


def save_params(params: GuidanceParams, target: str | Path) -> None:
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(params.as_dict(), fh, indent=2)
        fh.write("\n")


def load_params(source: str | Path) -> GuidanceParams:
    with open(source, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return validate_params(payload["alpha"], payload["beta"],
                           source=payload.get("source", "file"),
                           model=payload.get("model"))


def load_probability_file(source: str | Path) -> ProbabilityVector:
    """Read a two-column node,probability CSV covering nodes 0..n-1."""
    rows: dict[int, float] = {}
    with open(source, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "node,probability":
            raise ValueError(f"expected 'node,probability' header, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            node_text, value_text = line.split(",")
            rows[int(node_text)] = float(value_text)
    n = len(rows)
    if n == 0:
        raise ValueError("probability file has no rows")
    if sorted(rows) != list(range(n)):
        raise ValueError("probability file must cover node ids 0..n-1 exactly once")
    return probabilities_from_values([rows[v] for v in range(n)])


def save_probability_file(vector: ProbabilityVector, target: str | Path) -> None:
    with open(target, "w", encoding="utf-8") as fh:
        fh.write("node,probability\n")
        for v, value in enumerate(vector.values):
            fh.write(f"{v},{value!r}\n")
