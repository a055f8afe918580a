"""Unpruned interpolated modified Kneser-Ney n-gram language models.

Conventions (shared with the ARPA files this module reads and writes):

* every document is padded with a single ``<s>`` and a single ``</s>``;
* ``<s>`` is a context only and never predicted, ``</s>`` is predicted;
* the highest order keeps raw counts, lower orders keep continuation
  counts (distinct left extensions), except n-grams that begin with
  ``<s>``, which cannot have a left extension and keep raw counts;
* the unigram distribution is interpolated with a uniform distribution
  over the vocabulary, ``<unk>`` included and ``<s>`` excluded;
* all probabilities are log10.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from . import _score
from .corpus import Document

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SENTINELS = (BOS, EOS, UNK)
MAX_ORDER = 6
DEFAULT_ORDER = 5
# log10 probability written for <s>, which is never predicted
BOS_LOGPROB = -99.0
FALLBACK_DISCOUNTS = (0.5, 1.0, 1.5)

NGram = tuple[str, ...]


class DegenerateCountsError(ValueError):
    """Counts-of-counts cannot support modified Kneser-Ney discounts."""


@dataclass
class NGramCounts:
    """Adjusted n-gram counts, indexed ``counts[k - 1][ngram]``."""

    order: int
    counts: list[dict[NGram, int]]
    counts_of_counts: list[dict[int, int]]
    n_tokens: int = 0
    n_docs: int = 0

    def __getitem__(self, k: int) -> dict[NGram, int]:
        return self.counts[k - 1]

    @property
    def unigram_mass(self) -> int:
        return sum(c for g, c in self.counts[0].items() if g[0] != BOS)


@dataclass(frozen=True)
class DiscountSet:
    """Per-order ``(D1, D2, D3+)``; ``values[k - 1]`` is order k."""

    values: tuple[tuple[float, float, float], ...]
    warnings: tuple[str, ...] = ()

    def __getitem__(self, k: int) -> tuple[float, float, float]:
        return self.values[k - 1]

    def for_count(self, k: int, count: int) -> float:
        d1, d2, d3 = self.values[k - 1]
        return d1 if count == 1 else d2 if count == 2 else d3


@dataclass(frozen=True)
class PerplexityScore:
    doc_id: str
    log10_sum: float
    n_tokens: int
    ppl: float

    def to_dict(self) -> dict:
        return {"id": self.doc_id, "logprob": self.log10_sum, "tokens": self.n_tokens, "ppl": self.ppl}


def count_ngrams(docs: Iterable[Sequence[str]], order: int = DEFAULT_ORDER) -> NGramCounts:
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [1, {MAX_ORDER}], got {order}")
    raw: list[Counter] = [Counter() for _ in range(order)]
    n_tokens = n_docs = 0
    for toks in docs:
        toks = tuple(toks)
        for t in toks:
            if t in SENTINELS:
                raise ValueError(f"reserved token {t!r} in training data")
        seq = (BOS,) + toks + (EOS,)
        n_tokens += len(toks)
        n_docs += 1
        length = len(seq)
        for k in range(1, order + 1):
            c = raw[k - 1]
            for i in range(length - k + 1):
                c[seq[i:i + k]] += 1
    if n_tokens == 0:
        raise ValueError("empty corpus: no tokens to count")

    counts: list[dict[NGram, int]] = [dict() for _ in range(order)]
    counts[order - 1] = dict(raw[order - 1])
    for k in range(order - 1, 0, -1):
        left_ext = Counter(g[1:] for g in raw[k])
        counts[k - 1] = {g: (r if g[0] == BOS else left_ext[g]) for g, r in raw[k - 1].items()}
    return NGramCounts(order, counts, _counts_of_counts(counts), n_tokens, n_docs)


def _counts_of_counts(counts: list[dict[NGram, int]]) -> list[dict[int, int]]:
    out = []
    for table in counts:
        coc = {1: 0, 2: 0, 3: 0, 4: 0}
        for g, c in table.items():
            if g == (BOS,):
                continue
            if c <= 4:
                coc[c] += 1
        out.append(coc)
    return out


def _discounts_for(coc: Mapping[int, int]) -> tuple[float, float, float]:
    n1, n2, n3, n4 = (coc.get(r, 0) for r in (1, 2, 3, 4))
    y = n1 / (n1 + 2 * n2)
    return (1 - 2 * y * n2 / n1, 2 - 3 * y * n3 / n2, 3 - 4 * y * n4 / n3)


def estimate_discounts(counts: NGramCounts, fallback: bool = False) -> DiscountSet:
    """Closed-form discounts from counts-of-counts, one triple per order.

    A discount ``D_r`` must lie in ``(0, r]`` (``D3+`` in ``(0, 3]``).
    Without ``fallback`` a violation raises :class:`DegenerateCountsError`;
    with it the order gets :data:`FALLBACK_DISCOUNTS` and a warning.
    """
    values, warnings = [], []
    for k, coc in enumerate(counts.counts_of_counts, start=1):
        missing = [r for r in (1, 2, 3, 4) if coc.get(r, 0) <= 0]
        if missing:
            problem = f"order {k}: counts-of-counts n{missing[0]} is zero"
        else:
            ds = _discounts_for(coc)
            bad = [r for r, d in zip((1, 2, 3), ds) if not 0 < d <= r]
            problem = f"order {k}: discount D{bad[0]} = {ds[bad[0] - 1]:.6g} out of range" if bad else None
        if problem is None:
            values.append(ds)
            continue
        if not fallback:
            raise DegenerateCountsError(problem + " (enable fallback discounts for tiny corpora)")
        msg = f"{problem}; using fallback discounts {FALLBACK_DISCOUNTS}"
        log.warning(msg)
        warnings.append(msg)
        values.append(FALLBACK_DISCOUNTS)
    return DiscountSet(tuple(values), tuple(warnings))


def estimate_model(counts: NGramCounts, discounts: DiscountSet) -> KneserNeyModel:
    order = counts.order
    # linear-space interpolated probabilities, per order
    probs: list[dict[NGram, float]] = []
    gammas: list[dict[NGram, float]] = []

    unigrams = {g: c for g, c in counts[1].items() if g[0] != BOS}
    total = sum(unigrams.values())
    d1, d2, d3 = discounts[1]
    n1 = sum(1 for c in unigrams.values() if c == 1)
    n2 = sum(1 for c in unigrams.values() if c == 2)
    n3 = len(unigrams) - n1 - n2
    gamma0 = (d1 * n1 + d2 * n2 + d3 * n3) / total
    vocab_size = len(unigrams) + (0 if (UNK,) in unigrams else 1)
    uniform = gamma0 / vocab_size
    p1 = {g: max(c - discounts.for_count(1, c), 0.0) / total + uniform for g, c in unigrams.items()}
    p1.setdefault((UNK,), uniform)
    probs.append(p1)

    for k in range(2, order + 1):
        table = counts[k]
        stats: dict[NGram, list] = defaultdict(lambda: [0, 0, 0, 0])
        for g, c in table.items():
            s = stats[g[:-1]]
            s[0] += c
            s[min(c, 3)] += 1
        d1, d2, d3 = discounts[k]
        gamma = {h: (d1 * s[1] + d2 * s[2] + d3 * s[3]) / s[0] for h, s in stats.items()}
        lower = probs[k - 2]
        pk = {}
        for g, c in table.items():
            h = g[:-1]
            pk[g] = max(c - discounts.for_count(k, c), 0.0) / stats[h][0] + gamma[h] * lower[g[1:]]
        probs.append(pk)
        gammas.append(gamma)

    tables: list[dict[NGram, tuple[float, float]]] = []
    for k in range(1, order + 1):
        backoff = gammas[k - 1] if k < order else {}
        table = {g: (math.log10(p), _log10_or_zero(backoff.get(g))) for g, p in probs[k - 1].items()}
        if k == 1 and (BOS,) in counts[1]:
            table[(BOS,)] = (BOS_LOGPROB, _log10_or_zero(backoff.get((BOS,))))
        tables.append(table)

    meta = {
        "training_tokens": counts.n_tokens,
        "training_docs": counts.n_docs,
        "discounts": [list(d) for d in discounts.values],
    }
    return KneserNeyModel(order, tables, meta)


def _log10_or_zero(x: float | None) -> float:
    return 0.0 if x is None else math.log10(x)


def train(
    docs: Iterable[Sequence[str]], order: int = DEFAULT_ORDER, fallback: bool = False
) -> KneserNeyModel:
    counts = count_ngrams(docs, order)
    return estimate_model(counts, estimate_discounts(counts, fallback=fallback))


class KneserNeyModel:
    """Backoff n-gram model: per order, ``ngram -> (log10 p, log10 backoff)``.

    Scoring goes through a compiled scorer when the extension is
    available (see :mod:`harmlm._score`), built lazily on first use.
    """

    def __init__(
        self, order: int, tables: Sequence[Mapping[NGram, tuple[float, float]]], meta: dict | None = None
    ):
        if len(tables) != order:
            raise ValueError(f"expected {order} tables, got {len(tables)}")
        if (UNK,) not in tables[0]:
            raise ValueError("unigram table lacks <unk>")
        self.order = order
        self.tables = tuple(MappingProxyType(dict(t)) for t in tables)
        self.meta = dict(meta or {})
        self.vocab = frozenset(g[0] for g in self.tables[0])
        self._scorer = None

    def __getstate__(self):
        return {"order": self.order, "tables": [dict(t) for t in self.tables], "meta": self.meta}

    def __setstate__(self, state):
        self.__init__(state["order"], state["tables"], state["meta"])

    @property
    def scorer(self):
        if self._scorer is None:
            self._scorer = _score.make_scorer(self.order, self.tables)
        return self._scorer

    def ngram_counts(self) -> list[int]:
        return [len(t) for t in self.tables]

    def cond_logprob(self, context: Sequence[str], word: str) -> float:
        """log10 p(word | context), using at most the last order-1 context tokens.

        Out-of-vocabulary words in either position are read as ``<unk>``.
        """
        vocab = self.vocab
        ctx = [t if t in vocab else UNK for t in context]
        ctx = ctx[len(ctx) - self.order + 1:] if self.order > 1 else []
        seq = ctx + [word if word in vocab else UNK]
        return _score.cond_logprob(self.tables, seq, 0, len(seq) - 1)

    def logprob(self, tokens: Sequence[str]) -> tuple[float, int]:
        return self.scorer.score(tokens)

    def perplexity(self, doc: Document | str, doc_id: str | None = None) -> PerplexityScore:
        if isinstance(doc, Document):
            text, doc_id = doc.content, doc.id if doc_id is None else doc_id
        else:
            text = doc
        total, n = self.scorer.score_text(text)
        return PerplexityScore(doc_id or "", total, n, 10.0 ** (-total / n))


def logprob(model: KneserNeyModel, tokens: Sequence[str]) -> tuple[float, int]:
    return model.logprob(tokens)


def perplexity(model: KneserNeyModel, doc: Document | str) -> PerplexityScore:
    return model.perplexity(doc)
