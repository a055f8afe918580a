"""Backoff-model scoring: compiled kernel with a pure-Python fallback.

The backend is picked at import time. ``_core`` (Cython) is used when it
was built; setting ``HARMLM_PURE_PYTHON=1`` forces the fallback. Both
implement the same query and sum terms in the same order, so they agree
to the last bit on identical tables.
"""

from __future__ import annotations

import os
from typing import Mapping, Sequence

from .textproc import TOKEN_RE

BOS, EOS, UNK = "<s>", "</s>", "<unk>"

try:
    if os.environ.get("HARMLM_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _core
except ImportError:
    _core = None

BACKEND = "cython" if _core is not None else "python"


def cond_logprob(tables: Sequence[Mapping], seq: Sequence[str], start: int, i: int) -> float:
    """log10 p(seq[i] | seq[start:i]) by longest match plus context backoffs.

    ``seq[start:i]`` must already be cut to at most order-1 tokens and
    every token must be in the unigram table.
    """
    lp = tables[0][(seq[i],)][0]
    matched = 1
    for n in range(2, i - start + 2):
        entry = tables[n - 1].get(tuple(seq[i - n + 1:i + 1]))
        if entry is None:
            break
        lp = entry[0]
        matched = n
    for j in range(matched, i - start + 1):
        entry = tables[j - 1].get(tuple(seq[i - j:i]))
        if entry is None:
            break
        lp += entry[1]
    return lp


class PyScorer:
    backend = "python"

    def __init__(self, order: int, tables: Sequence[Mapping]):
        self.order = order
        self.tables = tables
        self.vocab = frozenset(g[0] for g in tables[0])

    def score(self, tokens: Sequence[str]) -> tuple[float, int]:
        vocab = self.vocab
        seq = [BOS]
        seq.extend(t if t in vocab else UNK for t in tokens)
        seq.append(EOS)
        order, tables = self.order, self.tables
        total = 0.0
        for i in range(1, len(seq)):
            total += cond_logprob(tables, seq, max(0, i - order + 1), i)
        return total, len(seq) - 1

    def score_text(self, text: str) -> tuple[float, int]:
        return self.score(TOKEN_RE.findall(text.lower()))

    def score_many(self, docs: Sequence[Sequence[str]]) -> list[tuple[float, int]]:
        return [self.score(d) for d in docs]


def make_scorer(order: int, tables: Sequence[Mapping], backend: str | None = None):
    backend = backend or BACKEND
    if backend == "cython":
        if _core is None:
            raise RuntimeError("compiled backend not available; build with `pip install -e .`")
        return _core.Scorer(order, tables)
    if backend == "python":
        return PyScorer(order, tables)
    raise ValueError(f"unknown backend {backend!r}")
