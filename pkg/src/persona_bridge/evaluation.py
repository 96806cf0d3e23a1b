"""Scoring, aggregation into backbone x target x strategy tables, stability and error counts."""

from __future__ import annotations

import logging
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientRunsError, ShapeError, UndefinedSimilarityError
from .schema import PersonaProfile, PersonaSchema

logger = logging.getLogger(__name__)

STABILITY_THRESHOLD = 0.03
EXPECTED_RUNS = 5


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"vectors must be 1-D and equal length, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity is undefined for a zero vector")
    value = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class EvaluationReport:
    dimension_scores: dict[str, float]
    overall: float
    unresolved_count: int
    mismatches: dict[str, bool]
    predicted: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dimension_scores": dict(self.dimension_scores),
            "overall": self.overall,
            "unresolved_count": self.unresolved_count,
            "mismatches": dict(self.mismatches),
            "predicted": dict(self.predicted),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        return cls(
            data["dimension_scores"],
            data["overall"],
            data["unresolved_count"],
            data["mismatches"],
            data.get("predicted", {}),
        )


def _slot_key(dim: str, sub: str) -> str:
    return f"{dim}/{sub}"


def dimension_text(profile: PersonaProfile, schema: PersonaSchema, dimension: str) -> str:
    return " ".join(profile.dimension_values(schema, dimension))


def score_prediction(pred: PersonaProfile, truth: PersonaProfile, embedder, schema: PersonaSchema) -> EvaluationReport:
    """Per-dimension cosine between embedded value texts; overall is their mean."""
    pred.validate(schema)
    truth.validate(schema)
    names = [d.name for d in schema.dimensions]
    texts = [dimension_text(pred, schema, n) for n in names] + [dimension_text(truth, schema, n) for n in names]
    vectors = embedder.embed(texts)
    k = len(names)
    scores = {n: cosine_similarity(vectors[i], vectors[k + i]) for i, n in enumerate(names)}
    return EvaluationReport(
        dimension_scores=scores,
        overall=math.fsum(scores.values()) / k,
        unresolved_count=len(pred.unresolved),
        mismatches={_slot_key(d, s): pred[(d, s)] != truth[(d, s)] for d, s in schema.slots()},
        predicted={_slot_key(d, s): pred[(d, s)] for d, s in schema.slots()},
    )


@dataclass(frozen=True)
class RunResult:
    backbone: str
    target: str
    strategy: str
    score: float
    run_index: int = 0


@dataclass(frozen=True)
class StabilityResult:
    mean: float
    std: float
    threshold: float
    passed: bool


def stability(
    run_scores: Sequence[float], expected_runs: int = EXPECTED_RUNS, threshold: float = STABILITY_THRESHOLD
) -> StabilityResult:
    """Mean and sample (n-1) standard deviation; passes when std < threshold."""
    scores = [float(s) for s in run_scores]
    if len(scores) < max(expected_runs, 2):
        raise InsufficientRunsError(f"need {max(expected_runs, 2)} runs, got {len(scores)}")
    mean = statistics.fmean(scores)
    std = statistics.stdev(scores)
    return StabilityResult(mean, std, threshold, std < threshold)


@dataclass(frozen=True)
class MatrixCell:
    backbone: str
    target: str
    strategy: str
    mean: float
    run_scores: tuple[float, ...]
    std: float | None

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone,
            "target": self.target,
            "strategy": self.strategy,
            "mean": self.mean,
            "run_scores": list(self.run_scores),
            "std": self.std,
        }


def round_half_away(x: float, places: int = 2) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


STRATEGY_ORDER = ("vanilla", "frequency_aware", "pd_agent")
STRATEGY_LABELS = {"vanilla": "Vanilla", "frequency_aware": "+ Freq-Aware", "pd_agent": "+ PD-Agent"}


@dataclass
class MatrixReport:
    cells: list[MatrixCell]
    row_means: dict[tuple[str, str], float]
    targets: list[str]
    target_groups: dict[str, str]
    failed: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stability: dict[str, dict] = field(default_factory=dict)

    def cell(self, backbone: str, target: str, strategy: str) -> MatrixCell | None:
        for c in self.cells:
            if (c.backbone, c.target, c.strategy) == (backbone, target, strategy):
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "row_means": [
                {"backbone": b, "strategy": s, "mean": round(m, 4), "mean_full": m}
                for (b, s), m in self.row_means.items()
            ],
            "targets": [{"id": t, "group": self.target_groups.get(t, "")} for t in self.targets],
            "failed": self.failed,
            "warnings": self.warnings,
            "stability": self.stability,
        }

    def to_markdown(self) -> str:
        groups: dict[str, list[str]] = defaultdict(list)
        for t in self.targets:
            groups[self.target_groups.get(t, "") or "Targets"].append(t)
        order = sorted(groups, key=lambda g: {"small": 0, "large": 1}.get(g.lower(), 2))
        cols = [t for g in order for t in groups[g]]
        group_cells = []
        for g in order:
            title = f"**{g.capitalize()} Target LLMs**" if g.lower() in ("small", "large") else f"**{g}**"
            group_cells += [title] + [""] * (len(groups[g]) - 1)
        head1 = "| | | " + " | ".join(group_cells) + " | |"
        lines = [
            head1,
            "|---|---|" + "---|" * (len(cols) + 1),
            "| **Backbone** | **Method** | " + " | ".join(f"**{t}**" for t in cols) + " | **Avg.** |",
        ]
        for (b, s), mean in self.row_means.items():
            row = []
            for t in cols:
                c = self.cell(b, t, s)
                row.append(round_half_away(c.mean) if c else "n/a")
            label = STRATEGY_LABELS.get(s, s)
            lines.append(f"| {b} | {label} | " + " | ".join(row) + f" | {round_half_away(mean)} |")
        if self.failed:
            lines += ["", "Failed cells:"]
            lines += [f"- {f['backbone']} / {f['target']}: {f['error']}" for f in self.failed]
        return "\n".join(lines) + "\n"


def _strategy_rank(s: str) -> tuple[int, str]:
    return (STRATEGY_ORDER.index(s) if s in STRATEGY_ORDER else len(STRATEGY_ORDER), s)


def aggregate_matrix(
    results: Iterable[RunResult],
    targets: Sequence[str] | None = None,
    target_groups: dict[str, str] | None = None,
    expected_runs: int | None = None,
    threshold: float = STABILITY_THRESHOLD,
) -> MatrixReport:
    """Group run scores by (backbone, target, strategy) and average.

    Each (backbone, strategy) row also gets the mean of its cell means over
    targets. Results are sorted before grouping, so input order never affects
    the report.
    """
    results = sorted(results, key=lambda r: (r.backbone, r.target, r.strategy, r.run_index, r.score))
    grouped: dict[tuple[str, str, str], list[float]] = defaultdict(list)
    for r in results:
        grouped[(r.backbone, r.target, r.strategy)].append(float(r.score))
    target_list = list(targets) if targets is not None else sorted({r.target for r in results})
    warnings = []
    cells = []
    stab = {}
    for (b, t, s), scores in sorted(grouped.items()):
        if not scores:
            warnings.append(f"empty group {b}/{t}/{s} omitted")
            continue
        std = statistics.stdev(scores) if len(scores) > 1 else None
        cells.append(MatrixCell(b, t, s, math.fsum(scores) / len(scores), tuple(scores), std))
        if expected_runs:
            key = f"{b}/{t}/{s}"
            try:
                st = stability(scores, expected_runs, threshold)
                stab[key] = {"mean": st.mean, "std": st.std, "passed": st.passed, "threshold": threshold}
            except InsufficientRunsError as exc:
                stab[key] = {"error": str(exc), "passed": False}
    rows: dict[tuple[str, str], list[float]] = defaultdict(list)
    for c in cells:
        rows[(c.backbone, c.strategy)].append(c.mean)
    row_keys = sorted(rows, key=lambda bs: (bs[0], _strategy_rank(bs[1])))
    row_means = {k: math.fsum(rows[k]) / len(rows[k]) for k in row_keys}
    for w in warnings:
        logger.warning(w)
    return MatrixReport(cells, row_means, target_list, dict(target_groups or {}), [], warnings, stab)


@dataclass(frozen=True)
class ErrorBreakdown:
    by_dimension: dict[str, int]
    by_subcategory: dict[str, int]


def error_breakdown(
    reports: Sequence[EvaluationReport], truths: Sequence[PersonaProfile], schema: PersonaSchema
) -> ErrorBreakdown:
    """Count exact-value mismatches per dimension and per subcategory."""
    if len(reports) != len(truths):
        raise ShapeError(f"{len(reports)} reports but {len(truths)} ground-truth profiles")
    by_dim = {d.name: 0 for d in schema.dimensions}
    by_sub = {_slot_key(d, s): 0 for d, s in schema.slots()}
    for report, truth in zip(reports, truths):
        for d, s in schema.slots():
            key = _slot_key(d, s)
            if key not in report.predicted:
                raise ShapeError(f"report lacks a prediction for {key}")
            if report.predicted[key] != truth[(d, s)]:
                by_dim[d] += 1
                by_sub[key] += 1
    return ErrorBreakdown(by_dim, by_sub)
