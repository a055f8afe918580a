"""Classifier baselines: TF-IDF with multinomial Naive Bayes or logistic
regression trained by SGD, and a fastText-style hashed bag-of-n-grams
linear classifier.

Class index 1 is harmful, 0 is non-harmful.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._score import _core
from .corpus import Label

log = logging.getLogger(__name__)

FORMAT_TAG = "harmlm-baseline"
FORMAT_VERSION = 1
KINDS = ("nb", "sgd", "hashed")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a64_py(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


fnv1a64 = _core.fnv1a64 if _core is not None else _fnv1a64_py


@lru_cache(maxsize=1 << 20)
def _hash_str(s: str) -> int:
    return fnv1a64(s.encode("utf-8"))


def _as_targets(y: Sequence) -> np.ndarray:
    out = np.array([(v.is_harmful if isinstance(v, Label) else bool(v)) for v in y], dtype=np.int64)
    if out.size == 0 or out.min() == out.max():
        raise ValueError("training data must contain both classes")
    return out


# --- TF-IDF -----------------------------------------------------------------


@dataclass
class TfidfVectorizer:
    vocabulary: dict[str, int]
    idf: np.ndarray
    max_df: float = 1.0
    smoothing: bool = True
    norm: str | None = "l2"

    def transform(self, doc: Sequence[str]) -> sp.csr_matrix:
        return self.transform_many([doc])

    def transform_many(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        indptr, indices, data = [0], [], []
        vocab = self.vocabulary
        for doc in docs:
            tf = Counter(vocab[t] for t in doc if t in vocab)
            cols = sorted(tf)
            vals = np.array([tf[c] * self.idf[c] for c in cols], dtype=float)
            if self.norm == "l2" and vals.size:
                vals /= math.sqrt(float(vals @ vals))
            indices.extend(cols)
            data.extend(vals.tolist())
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
            shape=(len(docs), len(vocab)),
        )


def fit_tfidf(
    docs: Sequence[Sequence[str]], max_df: float = 1.0, smoothing: bool = True, norm: str | None = "l2"
) -> TfidfVectorizer:
    """Document frequencies over ``docs``; tokens with df > max_df * |docs| are dropped.

    idf is ``ln((1 + n) / (1 + df)) + 1`` with smoothing, else ``ln(n / df) + 1``.
    """
    if not 0 < max_df <= 1:
        raise ValueError(f"max_df must be in (0, 1], got {max_df!r}")
    if norm not in ("l2", None):
        raise ValueError(f"norm must be 'l2' or None, got {norm!r}")
    n = len(docs)
    if n == 0:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df = Counter(t for doc in docs for t in set(doc))
    limit = max_df * n
    terms = sorted(t for t, c in df.items() if c <= limit)
    dfs = np.array([df[t] for t in terms], dtype=float)
    if smoothing:
        idf = np.log((1 + n) / (1 + dfs)) + 1
    else:
        idf = np.log(n / dfs) + 1
    return TfidfVectorizer({t: i for i, t in enumerate(terms)}, idf, max_df, smoothing, norm)


def transform(v: TfidfVectorizer, doc: Sequence[str]) -> sp.csr_matrix:
    return v.transform(doc)


# --- classifiers ------------------------------------------------------------


@dataclass
class LinearTextClassifier:
    """A trained baseline. ``weights`` holds the per-kind parameter arrays:

    * ``nb``: ``log_prior`` (2,), ``log_likelihood`` (2, V)
    * ``sgd``: ``coef`` (V,), ``intercept`` (1,)
    * ``hashed``: ``input`` (B, d), ``output`` (2, d)
    """

    kind: str
    weights: dict[str, np.ndarray]
    config: dict = field(default_factory=dict)
    vectorizer: TfidfVectorizer | None = None
    pipeline: dict | None = None

    def predict_proba(self, x) -> np.ndarray:
        """P(harmful) for each row of ``x``.

        ``x`` is a sparse TF-IDF matrix for ``nb``/``sgd`` and a list of
        token sequences for ``hashed``.
        """
        if self.kind == "nb":
            joint = np.asarray(x @ self.weights["log_likelihood"].T) + self.weights["log_prior"]
            joint -= joint.max(axis=1, keepdims=True)
            e = np.exp(joint)
            return e[:, 1] / e.sum(axis=1)
        if self.kind == "sgd":
            z = np.asarray(x @ self.weights["coef"]).ravel() + self.weights["intercept"][0]
            return _sigmoid(z)
        if self.kind == "hashed":
            return np.array([_hashed_forward(self, doc)[1] for doc in x])
        raise ValueError(f"unknown classifier kind {self.kind!r}")

    def prepare(self, docs: Sequence[Sequence[str]]):
        """Turn token sequences into this classifier's input representation."""
        if self.kind == "hashed":
            return list(docs)
        if self.vectorizer is None:
            raise ValueError("classifier has no TF-IDF vectorizer")
        return self.vectorizer.transform_many(docs)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def predict(clf: LinearTextClassifier, x) -> tuple[Label, float]:
    """Label and probability of that label for one document.

    ``x`` is a 1-row sparse vector (nb/sgd) or a token sequence (hashed).
    """
    if clf.kind == "hashed":
        p = float(clf.predict_proba([x])[0])
    else:
        p = float(clf.predict_proba(x)[0])
    return (Label.HARMFUL, p) if p >= 0.5 else (Label.NON_HARMFUL, 1.0 - p)


def train_nb(X: sp.spmatrix, y: Sequence, alpha: float = 1.0) -> LinearTextClassifier:
    """Multinomial Naive Bayes with add-``alpha`` smoothing on feature weights."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    t = _as_targets(y)
    X = sp.csr_matrix(X)
    counts = np.bincount(t, minlength=2).astype(float)
    log_prior = np.log(counts / counts.sum())
    fc = np.vstack([np.asarray(X[t == c].sum(axis=0)).ravel() for c in (0, 1)])
    smoothed = fc + alpha
    with np.errstate(divide="ignore"):
        log_lik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    return LinearTextClassifier("nb", {"log_prior": log_prior, "log_likelihood": log_lik}, {"alpha": alpha})


def train_logistic_sgd(
    X: sp.spmatrix, y: Sequence, lr: float = 0.5, epochs: int = 10, seed: int = 0
) -> LinearTextClassifier:
    """Per-example SGD on the logistic loss; the step size decays linearly to 0.

    Weights start at zero and each epoch visits examples in a fresh
    permutation drawn from ``seed``.
    """
    if lr < 0:
        raise ValueError("lr must be non-negative")
    t = _as_targets(y).astype(float)
    X = sp.csr_matrix(X)
    n, dim = X.shape
    coef = np.zeros(dim)
    bias = 0.0
    rng = np.random.default_rng(seed)
    total = max(1, n * epochs)
    step = 0
    indptr, indices, data = X.indptr, X.indices, X.data
    for _ in range(epochs):
        for i in rng.permutation(n):
            rate = lr * (1.0 - step / total)
            step += 1
            lo, hi = indptr[i], indptr[i + 1]
            cols, vals = indices[lo:hi], data[lo:hi]
            z = float(coef[cols] @ vals) + bias
            g = float(_sigmoid(z)) - t[i]
            coef[cols] -= rate * g * vals
            bias -= rate * g
    return LinearTextClassifier(
        "sgd",
        {"coef": coef, "intercept": np.array([bias])},
        {"lr": lr, "epochs": epochs, "seed": seed},
    )


def hashed_features(tokens: Sequence[str], buckets: int, word_ngrams: int = 2) -> np.ndarray:
    """Bucket ids of all unigrams and word n-grams up to ``word_ngrams``.

    Each feature string (n-gram tokens joined by one space) is hashed with
    64-bit FNV-1a over its UTF-8 bytes and reduced modulo ``buckets``.
    """
    feats = [_hash_str(t) % buckets for t in tokens]
    for n in range(2, word_ngrams + 1):
        for i in range(len(tokens) - n + 1):
            feats.append(_hash_str(" ".join(tokens[i:i + n])) % buckets)
    return np.array(feats, dtype=np.int64)


def _hashed_forward(clf: LinearTextClassifier, tokens: Sequence[str]) -> np.ndarray:
    cfg = clf.config
    feats = hashed_features(tokens, cfg["buckets"], cfg["word_ngrams"])
    if feats.size == 0:
        hidden = np.zeros(clf.weights["input"].shape[1])
    else:
        hidden = clf.weights["input"][feats].mean(axis=0)
    return _softmax(clf.weights["output"] @ hidden)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def train_hashed_linear(
    docs: Sequence[Sequence[str]],
    y: Sequence,
    buckets: int = 1 << 16,
    dim: int = 100,
    word_ngrams: int = 2,
    epochs: int = 10,
    lr: float = 0.1,
    threads: int = 4,
    seed: int = 0,
) -> LinearTextClassifier:
    """fastText-style training: mean of hashed feature embeddings, linear
    softmax on top, SGD with a linearly decaying step.

    Documents are put in a canonical order before the seeded shuffle, so
    with ``threads=1`` the result does not depend on input order. With
    more threads, workers update the shared weights without locks and the
    result is not reproducible bit-for-bit.
    """
    if buckets < 2:
        raise ValueError("buckets must be at least 2")
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    targets = _as_targets(y)
    examples = []
    for toks, target in zip(docs, targets):
        feats = hashed_features(toks, buckets, word_ngrams)
        if feats.size == 0:
            log.warning("empty document skipped in hashed-classifier training")
            continue
        examples.append((tuple(toks), int(target), feats))
    if len({e[1] for e in examples}) < 2:
        raise ValueError("training data must contain both classes")
    examples.sort(key=lambda e: (e[1], e[0]))

    rng = np.random.default_rng(seed)
    emb = rng.uniform(-1.0 / dim, 1.0 / dim, size=(buckets, dim))
    out = np.zeros((2, dim))
    n = len(examples)
    schedule = [rng.permutation(n) for _ in range(epochs)]
    total = max(1, n * epochs)

    def run(order: np.ndarray, offset: int, stride: int) -> None:
        for step, i in enumerate(order):
            rate = lr * (1.0 - (offset + step * stride) / total)
            _, target, feats = examples[i]
            hidden = emb[feats].mean(axis=0)
            grad = _softmax(out @ hidden)
            grad[target] -= 1.0
            grad_hidden = out.T @ grad
            out[:] -= rate * np.outer(grad, hidden)
            np.subtract.at(emb, feats, rate * grad_hidden / feats.size)

    flat = np.concatenate(schedule) if schedule else np.empty(0, dtype=np.int64)
    if threads == 1:
        run(flat, 0, 1)
    else:
        workers = [
            threading.Thread(target=run, args=(flat[k::threads], k, threads)) for k in range(threads)
        ]
        for w in workers:
            w.start()
        for w in workers:
            w.join()

    config = {
        "buckets": buckets,
        "dim": dim,
        "word_ngrams": word_ngrams,
        "epochs": epochs,
        "lr": lr,
        "threads": threads,
        "seed": seed,
    }
    return LinearTextClassifier("hashed", {"input": emb, "output": out}, config)


# --- persistence ------------------------------------------------------------


def save(clf: LinearTextClassifier, path: str | Path) -> None:
    """Write a versioned ``.npz`` container: arrays plus a JSON header."""
    meta = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": clf.kind,
        "config": clf.config,
        "pipeline": clf.pipeline,
    }
    arrays = {f"w_{k}": v for k, v in clf.weights.items()}
    if clf.vectorizer is not None:
        v = clf.vectorizer
        terms = sorted(v.vocabulary, key=v.vocabulary.__getitem__)
        meta["tfidf"] = {"terms": terms, "max_df": v.max_df, "smoothing": v.smoothing, "norm": v.norm}
        arrays["idf"] = v.idf
    arrays["meta"] = np.array(json.dumps(meta))
    with Path(path).open("wb") as fh:
        np.savez_compressed(fh, **arrays)


def load(path: str | Path) -> LinearTextClassifier:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} file")
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {meta.get('version')!r}")
        weights = {k[2:]: z[k] for k in z.files if k.startswith("w_")}
        vectorizer = None
        if "tfidf" in meta:
            t = meta["tfidf"]
            vectorizer = TfidfVectorizer(
                {term: i for i, term in enumerate(t["terms"])}, z["idf"], t["max_df"], t["smoothing"], t["norm"]
            )
    return LinearTextClassifier(meta["kind"], weights, meta["config"], vectorizer, meta.get("pipeline"))
