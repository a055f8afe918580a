"""OSCAR-style JSONLines ingestion, annotation filtering and dataset splits."""

from __future__ import annotations

import enum
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

ADULT_TAG = "adult"


class Label(str, enum.Enum):
    HARMFUL = "harmful"
    NON_HARMFUL = "non_harmful"

    @property
    def is_harmful(self) -> bool:
        return self is Label.HARMFUL


class LabelRule(str, enum.Enum):
    FROM_ADULT_ANNOTATION = "adult"
    FIXED_HARMFUL = "harmful"
    FIXED_NON_HARMFUL = "non_harmful"
    NONE = "none"


@dataclass(frozen=True)
class Document:
    id: str
    content: str
    annotations: frozenset[str] = field(default_factory=frozenset)
    gold_label: Label | None = None
    source: str = ""


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Document, ...]
    validation: tuple[Document, ...]
    test: tuple[Document, ...]
    seed: int


class ReadResult(list):
    """List of documents that also remembers how many lines were skipped."""

    def __init__(self, docs: Iterable[Document] = (), skipped: int = 0):
        super().__init__(docs)
        self.skipped = skipped


def _annotations(obj: dict) -> frozenset[str]:
    meta = obj.get("metadata")
    if not isinstance(meta, dict):
        return frozenset()
    ann = meta.get("annotation")
    if not isinstance(ann, list):
        return frozenset()
    return frozenset(a for a in ann if isinstance(a, str))


def _label(rule: LabelRule, annotations: frozenset[str]) -> Label | None:
    if rule is LabelRule.FROM_ADULT_ANNOTATION:
        return Label.HARMFUL if ADULT_TAG in annotations else Label.NON_HARMFUL
    if rule is LabelRule.FIXED_HARMFUL:
        return Label.HARMFUL
    if rule is LabelRule.FIXED_NON_HARMFUL:
        return Label.NON_HARMFUL
    return None


def parse_record(
    line: str, source: str, lineno: int, label_rule: LabelRule = LabelRule.NONE
) -> tuple[Document, dict]:
    """Parse one JSONLines record.

    Returns the document and the decoded JSON object (callers that
    re-serialize need the original fields). Raises ``ValueError`` on a
    malformed or content-less line.
    """
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    content = obj.get("content")
    if not isinstance(content, str):
        raise ValueError("missing string field 'content'")
    if not content:
        raise ValueError("empty 'content'")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str):
        doc_id = f"{source}:{lineno}"
    ann = _annotations(obj)
    return Document(doc_id, content, ann, _label(label_rule, ann), source), obj


def iter_records(
    path: str | Path, label_rule: LabelRule = LabelRule.NONE, counter: list | None = None
) -> Iterator[tuple[Document, dict, str]]:
    """Stream ``(document, json_object, raw_line)`` from a JSONLines file.

    Bad lines are logged and skipped; when ``counter`` is given its first
    element is incremented once per skipped line.
    """
    path = Path(path)
    source = path.name
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc, obj = parse_record(line, source, lineno, label_rule)
            except (ValueError, json.JSONDecodeError) as exc:
                log.warning("%s:%d skipped: %s", source, lineno, exc)
                if counter is not None:
                    counter[0] += 1
                continue
            yield doc, obj, line


def read_jsonlines(path: str | Path, label_rule: LabelRule = LabelRule.NONE) -> ReadResult:
    """Read every valid document of an OSCAR-style JSONLines file, in order.

    ``OSError`` from an unreadable file propagates; malformed lines are
    skipped and counted in ``result.skipped``.
    """
    counter = [0]
    docs = [doc for doc, _, _ in iter_records(path, LabelRule(label_rule), counter)]
    if counter[0]:
        log.warning("%s: %d malformed line(s) skipped", Path(path).name, counter[0])
    return ReadResult(docs, counter[0])


def to_record(doc: Document) -> dict:
    obj: dict = {"id": doc.id, "content": doc.content}
    if doc.annotations:
        obj["metadata"] = {"annotation": sorted(doc.annotations)}
    return obj


def write_jsonlines(docs: Iterable[Document], path: str | Path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(to_record(doc), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def filter_by_annotation(docs: Iterable[Document], tag: str) -> list[Document]:
    return [d for d in docs if tag in d.annotations]


def split_dataset(
    docs: Sequence[Document], ratios: tuple[float, float, float], seed: int
) -> DatasetSplit:
    """Shuffle by ``seed`` and cut into train/validation/test.

    Train and validation sizes are floored; the remainder goes to test.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive fractions, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    if len(docs) < 3:
        raise ValueError(f"need at least 3 documents to split, got {len(docs)}")
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("document ids must be unique")

    order = list(range(len(docs)))
    random.Random(seed).shuffle(order)
    shuffled = [docs[i] for i in order]
    # epsilon guards products like 100 * 0.29 == 28.999999999999996
    n_train = int(len(docs) * ratios[0] + 1e-9)
    n_val = int(len(docs) * ratios[1] + 1e-9)
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train:n_train + n_val]),
        test=tuple(shuffled[n_train + n_val:]),
        seed=seed,
    )
