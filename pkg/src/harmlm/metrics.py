"""Binary confusion counts and F1 reporting (positive class = harmful)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

from .corpus import Label


class JoinError(ValueError):
    """Prediction and gold id sets differ."""

    def __init__(self, missing: list[str], extra: list[str]):
        self.missing = missing
        self.extra = extra
        parts = []
        if missing:
            parts.append(f"missing predictions for {len(missing)} id(s): {_preview(missing)}")
        if extra:
            parts.append(f"{len(extra)} predicted id(s) not in gold: {_preview(extra)}")
        super().__init__("; ".join(parts))


def _preview(ids: list[str], n: int = 10) -> str:
    shown = ", ".join(ids[:n])
    return shown + (", ..." if len(ids) > n else "")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def swapped(self) -> ConfusionCounts:
        """Counts with the positive class flipped to non-harmful."""
        return ConfusionCounts(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EvalReport:
    confusion: ConfusionCounts
    precision_harmful: float
    recall_harmful: float
    f1_harmful: float
    precision_non_harmful: float
    recall_non_harmful: float
    f1_non_harmful: float
    f1_macro: float
    accuracy: float
    degenerate: tuple[str, ...] = ()
    eval_set: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.to_dict()
        d["degenerate"] = list(self.degenerate)
        return d


def _label_of(value) -> bool:
    if isinstance(value, Label):
        return value.is_harmful
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return Label(value).is_harmful
    raise TypeError(f"not a label: {value!r}")


def confusion(
    preds: Iterable[tuple[str, object]] | Mapping[str, object],
    gold: Iterable[tuple[str, object]] | Mapping[str, object],
) -> ConfusionCounts:
    """Cross-tabulate predictions against gold labels joined by document id.

    Labels may be :class:`Label` values, their string values, or booleans
    meaning "harmful".
    """
    p = dict(preds.items() if isinstance(preds, Mapping) else preds)
    g = dict(gold.items() if isinstance(gold, Mapping) else gold)
    if p.keys() != g.keys():
        raise JoinError(sorted(g.keys() - p.keys()), sorted(p.keys() - g.keys()))
    tp = tn = fp = fn = 0
    for doc_id, gold_label in g.items():
        truth = _label_of(gold_label)
        pred = _label_of(p[doc_id])
        if pred and truth:
            tp += 1
        elif pred:
            fp += 1
        elif truth:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def _f1(tp: int, fp: int, fn: int) -> tuple[float, float, float, bool]:
    precision, p_bad = _ratio(tp, tp + fp)
    recall, r_bad = _ratio(tp, tp + fn)
    # 2tp / (2tp + fp + fn) equals the harmonic mean whenever it is defined
    f1, _ = _ratio(2 * tp, 2 * tp + fp + fn)
    return precision, recall, f1, p_bad or r_bad


def report(c: ConfusionCounts, eval_set: str | None = None) -> EvalReport:
    if c.total <= 0:
        raise ValueError("cannot report on zero evaluated documents")
    p_h, r_h, f1_h, bad_h = _f1(c.tp, c.fp, c.fn)
    p_n, r_n, f1_n, bad_n = _f1(c.tn, c.fn, c.fp)
    degenerate = tuple(name for name, bad in (("harmful", bad_h), ("non_harmful", bad_n)) if bad)
    return EvalReport(
        confusion=c,
        precision_harmful=p_h,
        recall_harmful=r_h,
        f1_harmful=f1_h,
        precision_non_harmful=p_n,
        recall_non_harmful=r_n,
        f1_non_harmful=f1_n,
        f1_macro=(f1_h + f1_n) / 2,
        accuracy=(c.tp + c.tn) / c.total,
        degenerate=degenerate,
        eval_set=eval_set,
    )
