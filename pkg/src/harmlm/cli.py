"""Command-line pipeline: train, score, sweep, classify, evaluate.

Exit status is 0 on success, 2 for bad input or usage, 1 for anything
else. Machine-readable results go to files or standard output; progress
and human summaries go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, Sequence

from . import arpa, baselines, ngram
from .corpus import Label, LabelRule, iter_records, parse_record, read_jsonlines
from .metrics import JoinError, confusion, report
from .ngram import DegenerateCountsError
from .textproc import Pipeline, lm_tokenize
from .threshold import sweep_thresholds

log = logging.getLogger("harmlm")

CHUNK_BYTES = 1 << 20
CHUNK_LINES = 512


class UserError(Exception):
    """Bad arguments or input; reported with exit status 2."""


# --- helpers ----------------------------------------------------------------


def _require(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) in (None, [])]
    if missing:
        raise UserError(f"{args.command}: missing required option(s) {', '.join(missing)}")


def _readable(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UserError(f"no such file: {p}")
    return p


def _writable(path) -> Path:
    p = Path(path)
    if not p.parent.exists():
        raise UserError(f"output directory does not exist: {p.parent}")
    return p


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    sys.stdout.flush()


def _chunks(path: Path) -> Iterator[list[tuple[int, str]]]:
    chunk, size = [], 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            chunk.append((lineno, line))
            size += len(line)
            if size >= CHUNK_BYTES or len(chunk) >= CHUNK_LINES:
                yield chunk
                chunk, size = [], 0
    if chunk:
        yield chunk


# Scoring workers. The model travels to forked workers through this global;
# workers started another way load it from the ARPA path.
_WORKER = {"model": None, "path": None}


def _init_worker(model_path: str) -> None:
    if _WORKER["model"] is None or _WORKER["path"] != model_path:
        model = arpa.read_arpa(model_path)
        model.scorer  # build the lookup tables once, before forking
        _WORKER["model"] = model
        _WORKER["path"] = model_path


def _score_chunk(task: tuple[str, str, float | None, list[tuple[int, str]]]) -> tuple[list[str], int, int]:
    """Score one chunk; returns output lines, skipped input lines and the
    number of documents labeled harmful.

    With ``theta`` set, the input record is re-emitted with ``ppl`` and
    ``harmful`` fields; otherwise a compact score record is written.
    """
    source, mode, theta, chunk = task
    model = _WORKER["model"]
    scorer = model.scorer
    out, skipped, harmful = [], 0, 0
    for lineno, line in chunk:
        try:
            doc, obj = parse_record(line, source, lineno)
        except ValueError as exc:
            log.warning("%s:%d skipped: %s", source, lineno, exc)
            skipped += 1
            continue
        total, n = scorer.score_text(doc.content)
        ppl = 10.0 ** (-total / n)
        if mode == "score":
            rec = {"id": doc.id, "logprob": total, "tokens": n, "ppl": ppl}
        else:
            rec = dict(obj)
            rec.setdefault("id", doc.id)
            rec["ppl"] = ppl
            rec["harmful"] = ppl <= theta
            harmful += rec["harmful"]
        out.append(json.dumps(rec, ensure_ascii=False))
    return out, skipped, harmful


def _ordered_map(fn, tasks, threads: int, model_path: str) -> Iterator:
    """Apply ``fn`` over ``tasks`` with ``threads`` processes, yielding results
    in task order while keeping at most a few chunks in flight per worker."""
    if threads <= 1:
        for t in tasks:
            yield fn(t)
        return
    window = threads * 4
    with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker, initargs=(model_path,)) as ex:
        pending = []
        for t in tasks:
            pending.append(ex.submit(fn, t))
            if len(pending) >= window:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


def _stream_scores(args, mode: str, theta: float | None) -> dict:
    model_path = str(_readable(args.model))
    inp = _readable(args.input)
    out_path = _writable(args.out)
    if args.threads < 1:
        raise UserError("--threads must be at least 1")
    t0 = time.perf_counter()
    try:
        _init_worker(model_path)
    except (arpa.ArpaFormatError, UnicodeDecodeError) as exc:
        raise UserError(f"cannot read model {model_path}: {exc}") from None
    load_s = time.perf_counter() - t0

    source = inp.name
    tasks = ((source, mode, theta, chunk) for chunk in _chunks(inp))
    n_docs = n_harmful = skipped = 0
    t1 = time.perf_counter()
    with out_path.open("w", encoding="utf-8", newline="\n") as fh:
        for lines, bad, harmful in _ordered_map(_score_chunk, tasks, args.threads, model_path):
            skipped += bad
            n_harmful += harmful
            for line in lines:
                fh.write(line)
                fh.write("\n")
            n_docs += len(lines)
    wall = time.perf_counter() - t1
    nbytes = inp.stat().st_size
    mbps = nbytes / 1e6 / wall if wall > 0 else float("inf")
    summary = {
        "documents": n_docs,
        "skipped": skipped,
        "bytes": nbytes,
        "seconds": round(wall, 4),
        "model_load_seconds": round(load_s, 4),
        "mb_per_s": round(mbps, 3),
        "threads": args.threads,
        "backend": _WORKER["model"].scorer.backend,
    }
    print(
        f"scored {n_docs} documents ({nbytes / 1e6:.2f} MB) in {wall:.2f}s: "
        f"{mbps:.2f} MB/s with {args.threads} worker(s)",
        file=sys.stderr,
    )
    if mode == "classify":
        pct = 100.0 * n_harmful / n_docs if n_docs else 0.0
        summary.update(theta=theta, harmful=n_harmful, percent_harmful=round(pct, 4))
        print(f"predicted harmful: {n_harmful}/{n_docs} ({pct:.2f}%) at theta={theta}", file=sys.stderr)
    return summary


def _gold_labels(path, rule: str) -> dict[str, Label]:
    docs = read_jsonlines(_readable(path), LabelRule(rule))
    if any(d.gold_label is None for d in docs):
        raise UserError("gold labels need a --label-rule other than 'none'")
    return {d.id: d.gold_label for d in docs}


def _read_jsonl_objects(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UserError(f"{path.name}:{lineno}: invalid JSON ({exc})") from None
            if not isinstance(obj, dict):
                raise UserError(f"{path.name}:{lineno}: not a JSON object")
            yield lineno, obj


def _join_check(keys_a, keys_b) -> None:
    a, b = set(keys_a), set(keys_b)
    if a != b:
        raise JoinError(sorted(b - a), sorted(a - b))


# --- subcommands ------------------------------------------------------------


def cmd_lm_train(args) -> int:
    _require(args, "input", "out")
    paths = [_readable(p) for p in args.input]
    out = _writable(args.out)
    docs = []
    for p in paths:
        for d in read_jsonlines(p):
            if args.tag is None or args.tag in d.annotations:
                docs.append(lm_tokenize(d.content))
    if not any(docs):
        raise UserError("no tokens in training input")
    t0 = time.perf_counter()
    counts = ngram.count_ngrams(docs, args.order)
    discounts = ngram.estimate_discounts(counts, fallback=args.fallback_discounts)
    model = ngram.estimate_model(counts, discounts)
    arpa.write_arpa(model, out)
    _emit(
        {
            "model": str(out),
            "order": args.order,
            "documents": counts.n_docs,
            "tokens": counts.n_tokens,
            "vocab_size": len(model.vocab),
            "ngrams": model.ngram_counts(),
            "discounts": [list(d) for d in discounts.values],
            "warnings": list(discounts.warnings),
            "seconds": round(time.perf_counter() - t0, 3),
        }
    )
    return 0


def cmd_score(args) -> int:
    _require(args, "model", "input", "out")
    _emit(_stream_scores(args, "score", None))
    return 0


def cmd_classify(args) -> int:
    _require(args, "model", "input", "out")
    if args.report is not None:
        rep = json.loads(_readable(args.report).read_text(encoding="utf-8"))
        theta = float(rep["selected"][args.pick])
    elif args.theta is not None:
        theta = args.theta
    else:
        raise UserError("classify: give --theta or --report")
    if not theta > 0:
        raise UserError(f"theta must be positive, got {theta}")
    _emit(_stream_scores(args, "classify", theta))
    return 0


def cmd_sweep(args) -> int:
    _require(args, "scores", "gold", "out")
    scores_path = _readable(args.scores)
    out = _writable(args.out)
    gold = _gold_labels(args.gold, args.label_rule)
    scores = []
    for lineno, obj in _read_jsonl_objects(scores_path):
        try:
            scores.append((str(obj["id"]), float(obj["ppl"])))
        except (KeyError, TypeError, ValueError):
            raise UserError(f"{scores_path.name}:{lineno}: need 'id' and numeric 'ppl'") from None
    _join_check([s[0] for s in scores], gold)
    labels = {gold[i] for i in gold}
    if len(labels) < 2:
        raise UserError("gold labels contain a single class; cannot sweep")
    rep = sweep_thresholds([(ppl, gold[i]) for i, ppl in scores], grid_size=args.grid)
    rep.write_json(out)
    if args.tsv:
        rep.write_tsv(_writable(args.tsv))
    best = max(rep.grid, key=lambda p: p.f1_macro)
    print(
        f"best f1_macro {best.f1_macro:.4f} at theta={rep.selected.argmax_f1:.6g}; "
        f"max harmful ppl {rep.selected.max_harmful:.6g}; steepest step at {rep.selected.steepest_step:.6g}",
        file=sys.stderr,
    )
    _emit({"selected": rep.to_dict()["selected"], "best_f1_macro": best.f1_macro, "grid_points": len(rep.grid)})
    return 0


def _pred_label(obj: dict) -> bool:
    if isinstance(obj.get("harmful"), bool):
        return obj["harmful"]
    pred = obj.get("pred")
    if isinstance(pred, str) and pred in (Label.HARMFUL.value, Label.NON_HARMFUL.value):
        return pred == Label.HARMFUL.value
    raise ValueError("need boolean 'harmful' or 'pred' label")


def cmd_eval(args) -> int:
    _require(args, "pred", "gold", "out")
    pred_path = _readable(args.pred)
    out = _writable(args.out)
    gold = _gold_labels(args.gold, args.label_rule)
    preds = {}
    for lineno, obj in _read_jsonl_objects(pred_path):
        if not isinstance(obj.get("id"), str):
            raise UserError(f"{pred_path.name}:{lineno}: missing string 'id'")
        try:
            preds[obj["id"]] = _pred_label(obj)
        except ValueError as exc:
            raise UserError(f"{pred_path.name}:{lineno}: {exc}") from None
    rep = report(confusion(preds, gold), eval_set=args.name or Path(args.gold).name)
    Path(out).write_text(json.dumps(rep.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"{rep.eval_set}: f1_macro={rep.f1_macro:.4f} accuracy={rep.accuracy:.4f}", file=sys.stderr)
    _emit(rep.to_dict())
    return 0


def _baseline_pipeline(args) -> Pipeline:
    if args.pipeline:
        return Pipeline.from_file(_readable(args.pipeline))
    return Pipeline(["lowercase", "tokenize"])


def cmd_baseline(args) -> int:
    if args.action == "train":
        _require(args, "kind", "input", "out")
        out = _writable(args.out)
        pipeline = _baseline_pipeline(args)
        docs, labels = [], []
        for p in args.input:
            for d in read_jsonlines(_readable(p), LabelRule(args.label_rule)):
                if d.gold_label is None:
                    raise UserError("training labels need a --label-rule other than 'none'")
                docs.append(pipeline(d.content))
                labels.append(d.gold_label)
        if len(set(labels)) < 2:
            raise UserError("training data must contain both classes")
        lr = args.lr if args.lr is not None else (0.1 if args.kind == "hashed" else 0.5)
        t0 = time.perf_counter()
        if args.kind == "hashed":
            clf = baselines.train_hashed_linear(
                docs, labels, buckets=args.buckets, dim=args.dim, word_ngrams=args.word_ngrams,
                epochs=args.epochs, lr=lr, threads=args.threads, seed=args.seed,
            )
        else:
            vec = baselines.fit_tfidf(docs, args.max_df, not args.no_smooth_idf, None if args.norm == "none" else "l2")
            X = vec.transform_many(docs)
            if args.kind == "nb":
                clf = baselines.train_nb(X, labels, alpha=args.alpha)
            else:
                clf = baselines.train_logistic_sgd(X, labels, lr=lr, epochs=args.epochs, seed=args.seed)
            clf.vectorizer = vec
        clf.pipeline = pipeline.to_config()
        baselines.save(clf, out)
        proba = clf.predict_proba(clf.prepare(docs))
        preds = {str(i): bool(p >= 0.5) for i, p in enumerate(proba)}
        rep = report(confusion(preds, {str(i): lab for i, lab in enumerate(labels)}), eval_set="train")
        _emit({"kind": args.kind, "documents": len(docs), "train_f1_macro": rep.f1_macro,
               "seconds": round(time.perf_counter() - t0, 3), "model": str(out)})
        return 0

    _require(args, "model", "input", "out")
    clf = baselines.load(_readable(args.model))
    pipeline = Pipeline(clf.pipeline["steps"]) if clf.pipeline else Pipeline(["lowercase", "tokenize"])
    inputs = [_readable(p) for p in args.input]
    out = _writable(args.out)
    n = n_harmful = 0
    records = (rec for inp in inputs for rec in iter_records(inp))
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for doc, obj, _ in records:
            p = float(clf.predict_proba(clf.prepare([pipeline(doc.content)]))[0])
            harmful = p >= 0.5
            rec = dict(obj)
            rec.setdefault("id", doc.id)
            rec["pred"] = Label.HARMFUL.value if harmful else Label.NON_HARMFUL.value
            rec["harmful"] = harmful
            rec["score"] = p if harmful else 1.0 - p
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
            n_harmful += harmful
    _emit({"documents": n, "harmful": n_harmful, "percent_harmful": round(100.0 * n_harmful / n, 4) if n else 0.0})
    return 0


_UNITS = {"b": 1, "kb": 1e3, "mb": 1e6, "gb": 1e9, "tb": 1e12}


def _parse_size(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    for unit in ("tb", "gb", "mb", "kb", "b"):
        if t.endswith(unit):
            return float(t[: -len(unit)]) * _UNITS[unit]
    return float(t)


def estimate_hours(nbytes: float, throughput_mb_s: float) -> float:
    if throughput_mb_s <= 0:
        raise ValueError("throughput must be positive")
    return nbytes / (throughput_mb_s * 1e6) / 3600.0


def cmd_estimate_time(args) -> int:
    _require(args, "throughput", "sizes")
    if args.throughput <= 0:
        raise UserError("--throughput must be positive")
    rows = []
    with _readable(args.sizes).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            try:
                if len(parts) != 2:
                    raise ValueError("expected name<TAB>bytes")
                size = _parse_size(parts[1])
                if size < 0:
                    raise ValueError("negative size")
            except ValueError as exc:
                raise UserError(f"{args.sizes}:{lineno}: {exc}") from None
            rows.append((parts[0], size))
    sys.stdout.write("name\tbytes\thours\n")
    for name, size in rows:
        sys.stdout.write(f"{name}\t{size:.0f}\t{estimate_hours(size, args.throughput):.1f}\n")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harmlm", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="JSON file of option defaults (keys are option names)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lm-train", help="train a modified Kneser-Ney model, write ARPA")
    p.add_argument("--input", nargs="+", help="JSONLines training file(s)")
    p.add_argument("--out", help="ARPA output path")
    p.add_argument("--order", type=int, default=ngram.DEFAULT_ORDER, choices=range(1, ngram.MAX_ORDER + 1))
    p.add_argument("--tag", help="only use documents carrying this annotation")
    p.add_argument("--fallback-discounts", action="store_true", help="allow fixed discounts on degenerate counts")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("score", help="perplexity of every document")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="sweep thresholds on scored, labeled documents")
    p.add_argument("--scores")
    p.add_argument("--gold")
    p.add_argument("--label-rule", default=LabelRule.FROM_ADULT_ANNOTATION.value,
                   choices=[r.value for r in LabelRule])
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--out")
    p.add_argument("--tsv", help="also write the metric curves as TSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classify", help="label documents by perplexity threshold")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    which = p.add_mutually_exclusive_group()
    which.add_argument("--theta", type=float)
    which.add_argument("--report", help="take the threshold from a sweep report")
    p.add_argument("--pick", default="argmax_f1", choices=["argmax_f1", "max_harmful", "steepest_step"])
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="confusion counts and F1 against gold labels")
    p.add_argument("--pred")
    p.add_argument("--gold")
    p.add_argument("--label-rule", default=LabelRule.FROM_ADULT_ANNOTATION.value,
                   choices=[r.value for r in LabelRule])
    p.add_argument("--name", help="evaluation set name recorded in the report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="train or apply a classifier baseline")
    p.add_argument("action", choices=["train", "predict"])
    p.add_argument("--kind", choices=baselines.KINDS)
    p.add_argument("--input", nargs="+")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--label-rule", default=LabelRule.FROM_ADULT_ANNOTATION.value,
                   choices=[r.value for r in LabelRule])
    p.add_argument("--pipeline", help="preprocessing pipeline JSON")
    p.add_argument("--max-df", type=float, default=1.0)
    p.add_argument("--no-smooth-idf", action="store_true")
    p.add_argument("--norm", choices=["l2", "none"], default="l2")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lr", type=float, help="learning rate (default 0.5 for sgd, 0.1 for hashed)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--buckets", type=int, default=1 << 16)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--word-ngrams", type=int, default=2)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("estimate-time", help="labeling time from sizes and throughput")
    p.add_argument("--throughput", type=float, help="MB/s (1 MB = 10^6 bytes)")
    p.add_argument("--sizes", help="TSV of name<TAB>bytes")
    p.set_defaults(func=cmd_estimate_time)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = json.loads(_readable(known.config).read_text(encoding="utf-8"))
    if not isinstance(cfg, dict):
        raise UserError("--config must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**cfg)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UserError, json.JSONDecodeError) as exc:
        print(f"harmlm: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UserError, DegenerateCountsError, JoinError, arpa.ArpaFormatError) as exc:
        print(f"harmlm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, UnicodeDecodeError) as exc:
        print(f"harmlm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure")
        print(f"harmlm {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
