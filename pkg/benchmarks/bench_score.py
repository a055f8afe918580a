"""Compare the compiled and pure-Python scorers on the same model and text.

Trains a model on a synthetic Zipf-distributed corpus (or loads --model),
scores --input documents (or a synthetic sample) with both backends and
reports MB/s of document text for each, after checking that the two agree
bit for bit.

    python benchmarks/bench_score.py
    python benchmarks/bench_score.py --model a.arpa --input docs.jsonl
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time

from harmlm import _score
from harmlm.arpa import read_arpa
from harmlm.ngram import train
from harmlm.textproc import lm_tokenize


def synthetic_docs(n_docs: int, seed: int, vocab_size: int = 20_000) -> list[str]:
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    weights = [1.0 / (i + 1) for i in range(vocab_size)]
    docs = []
    for _ in range(n_docs):
        toks = rng.choices(words, weights, k=rng.randint(40, 300))
        docs.append(" ".join(toks) + ".")
    return docs


def read_contents(path: str, limit: int | None) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line)["content"])
            if limit and len(out) >= limit:
                break
    return out


def time_backend(scorer, docs: list[str], repeat: int) -> tuple[float, list]:
    best = float("inf")
    results = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        results = [scorer.score_text(d) for d in docs]
        best = min(best, time.perf_counter() - t0)
    return best, results


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", help="ARPA model; default trains one on synthetic text")
    ap.add_argument("--input", help="JSONLines documents to score; default synthetic")
    ap.add_argument("--order", type=int, default=3, help="order of the synthetic model")
    ap.add_argument("--docs", type=int, default=2000, help="synthetic / max documents to score")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if args.model:
        model = read_arpa(args.model)
    else:
        # i.i.d. words repeat few long n-grams, so discounts need the fallback
        docs = [lm_tokenize(d) for d in synthetic_docs(3000, args.seed)]
        model = train(docs, order=args.order, fallback=True)
    docs = read_contents(args.input, args.docs) if args.input else synthetic_docs(args.docs, args.seed + 1)
    mb = sum(len(d.encode("utf-8")) for d in docs) / 1e6

    rows = {}
    backends = ["python"] + (["cython"] if _score.BACKEND == "cython" else [])
    for name in backends:
        scorer = _score.make_scorer(model.order, model.tables, backend=name)
        secs, res = time_backend(scorer, docs, args.repeat)
        rows[name] = (secs, res)
        print(f"{name:>7}: {mb:.2f} MB in {secs:.3f}s = {mb / secs:8.2f} MB/s", file=sys.stderr)

    if "cython" in rows:
        if rows["cython"][1] != rows["python"][1]:
            print("MISMATCH between backends", file=sys.stderr)
            return 1
        print(f"speedup: {rows['python'][0] / rows['cython'][0]:.1f}x (results identical)", file=sys.stderr)
    else:
        print("compiled backend not built; only the fallback was timed", file=sys.stderr)
    print(json.dumps({k: round(mb / v[0], 3) for k, v in rows.items()}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
