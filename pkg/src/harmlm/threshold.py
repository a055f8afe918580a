"""Perplexity distributions per class, threshold sweeps and operating points.

A document is predicted harmful when its perplexity is at or below the
threshold: the language model is trained on harmful text, so harmful
documents are the unsurprising ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Label
from .metrics import ConfusionCounts, report
from .ngram import PerplexityScore

METRICS = ("f1_macro", "f1_harmful", "f1_non_harmful", "accuracy")


@dataclass(frozen=True)
class ClassDistribution:
    label: Label
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label"] = self.label.value
        return d


@dataclass(frozen=True)
class GridPoint:
    theta: float
    f1_macro: float
    f1_harmful: float
    f1_non_harmful: float
    accuracy: float


@dataclass(frozen=True)
class Selected:
    argmax_f1: float
    max_harmful: float
    steepest_step: float


@dataclass(frozen=True)
class ThresholdReport:
    grid: tuple[GridPoint, ...]
    selected: Selected
    distributions: tuple[ClassDistribution, ClassDistribution] | None = None

    def curve(self, metric: str) -> np.ndarray:
        return np.array([getattr(p, metric) for p in self.grid])

    def point(self, theta: float) -> GridPoint:
        for p in self.grid:
            if p.theta == theta:
                return p
        raise KeyError(theta)

    def to_dict(self) -> dict:
        d = {"grid": [asdict(p) for p in self.grid], "selected": asdict(self.selected)}
        if self.distributions is not None:
            d["distributions"] = [c.to_dict() for c in self.distributions]
        return d

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_tsv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("theta\t" + "\t".join(METRICS) + "\n")
            for p in self.grid:
                fh.write("\t".join(repr(v) for v in (p.theta, *(getattr(p, m) for m in METRICS))) + "\n")


def _split(scores: Iterable[tuple[PerplexityScore | float, Label | bool]]) -> tuple[np.ndarray, np.ndarray]:
    ppl, harmful = [], []
    for score, label in scores:
        ppl.append(score.ppl if isinstance(score, PerplexityScore) else float(score))
        harmful.append(label.is_harmful if isinstance(label, Label) else bool(label))
    return np.asarray(ppl, dtype=float), np.asarray(harmful, dtype=bool)


def _summary(label: Label, values: np.ndarray) -> ClassDistribution:
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    return ClassDistribution(label, int(values.size), *(float(v) for v in q))


def summarize_distributions(scores) -> tuple[ClassDistribution, ClassDistribution]:
    """Five-number summaries ``(harmful, non_harmful)``, quartiles by linear
    interpolation between order statistics."""
    ppl, harmful = _split(scores)
    if not harmful.any() or harmful.all():
        raise ValueError("both classes must be present")
    return _summary(Label.HARMFUL, ppl[harmful]), _summary(Label.NON_HARMFUL, ppl[~harmful])


def confusion_at(ppl: np.ndarray, harmful: np.ndarray, theta: float) -> ConfusionCounts:
    pred = ppl <= theta
    tp = int(np.sum(pred & harmful))
    fp = int(np.sum(pred & ~harmful))
    fn = int(np.sum(~pred & harmful))
    return ConfusionCounts(tp=tp, tn=int(ppl.size) - tp - fp - fn, fp=fp, fn=fn)


def quantile_grid(ppl: np.ndarray, grid_size: int) -> np.ndarray:
    q = np.arange(1, grid_size + 1) / (grid_size + 1)
    return np.unique(np.quantile(ppl, q))


def sweep_thresholds(scores, grid_size: int = 100) -> ThresholdReport:
    """Evaluate ``ppl <= theta`` over a quantile grid of the pooled scores.

    Three operating points are selected: the grid threshold with the best
    macro-F1 (smallest on ties), the largest harmful perplexity, and the
    grid point just after the largest summed jump of the four curves.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    ppl, harmful = _split(scores)
    if not harmful.any() or harmful.all():
        raise ValueError("both classes must be present to sweep thresholds")
    if not np.all(np.isfinite(ppl)):
        raise ValueError("perplexities must be finite")

    # counts of predicted-harmful per class via sorted arrays
    h_sorted = np.sort(ppl[harmful])
    n_sorted = np.sort(ppl[~harmful])
    points = []
    for theta in quantile_grid(ppl, grid_size):
        tp = int(np.searchsorted(h_sorted, theta, side="right"))
        fp = int(np.searchsorted(n_sorted, theta, side="right"))
        c = ConfusionCounts(tp=tp, tn=n_sorted.size - fp, fp=fp, fn=h_sorted.size - tp)
        r = report(c)
        points.append(GridPoint(float(theta), r.f1_macro, r.f1_harmful, r.f1_non_harmful, r.accuracy))

    macro = np.array([p.f1_macro for p in points])
    argmax = points[int(np.argmax(macro))].theta
    if len(points) > 1:
        curves = np.array([[getattr(p, m) for m in METRICS] for p in points])
        jumps = np.abs(np.diff(curves, axis=0)).sum(axis=1)
        steepest = points[int(np.argmax(jumps)) + 1].theta
    else:
        steepest = points[0].theta
    selected = Selected(argmax_f1=argmax, max_harmful=float(h_sorted[-1]), steepest_step=steepest)
    dists = (_summary(Label.HARMFUL, h_sorted), _summary(Label.NON_HARMFUL, n_sorted))
    return ThresholdReport(tuple(points), selected, dists)


def classify_by_threshold(
    scores: Sequence[PerplexityScore], theta: float
) -> list[tuple[str, Label]]:
    if not (math.isfinite(theta) and theta > 0):
        raise ValueError(f"theta must be finite and positive, got {theta!r}")
    return [(s.doc_id, Label.HARMFUL if s.ppl <= theta else Label.NON_HARMFUL) for s in scores]
