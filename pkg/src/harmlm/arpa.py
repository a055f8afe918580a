"""Read and write ARPA backoff language model files."""

from __future__ import annotations

import re
from pathlib import Path

from .ngram import BOS, EOS, UNK, KneserNeyModel

# Significant digits for log10 values. Seven (the usual ARPA precision)
# accumulates up to ~5e-7 error per token, too coarse to reproduce
# sentence scores within 1e-6, so files carry ten.
DEFAULT_PRECISION = 10

_NGRAM_HEADER = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION = re.compile(r"^\\(\d+)-grams:$")


class ArpaFormatError(ValueError):
    def __init__(self, lineno: int | None, msg: str):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{msg}")


def _fmt(x: float, precision: int) -> str:
    return f"{x:.{precision}g}"


def write_arpa(model: KneserNeyModel, path: str | Path, precision: int = DEFAULT_PRECISION) -> None:
    """Write ``model`` with n-grams sorted per order, so output is byte-stable."""
    order = model.order
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n\\data\\\n")
        for k, n in enumerate(model.ngram_counts(), start=1):
            fh.write(f"ngram {k}={n}\n")
        for k in range(1, order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            table = model.tables[k - 1]
            for gram in sorted(table):
                lp, bo = table[gram]
                line = f"{_fmt(lp, precision)}\t{' '.join(gram)}"
                if k < order and bo != 0.0:
                    line += f"\t{_fmt(bo, precision)}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def read_arpa(path: str | Path) -> KneserNeyModel:
    """Parse an ARPA file. Fields may be tab- or space-separated.

    Raises :class:`ArpaFormatError` naming the offending line.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")

    i = 0

    def next_nonblank() -> tuple[int, str] | None:
        nonlocal i
        while i < len(lines):
            text = lines[i].strip()
            i += 1
            if text:
                return i, text
        return None

    item = next_nonblank()
    if item is None or item[1] != "\\data\\":
        raise ArpaFormatError(item[0] if item else None, "missing \\data\\ header")

    declared: dict[int, int] = {}
    item = next_nonblank()
    while item is not None:
        lineno, text = item
        m = _NGRAM_HEADER.match(text)
        if not m:
            break
        k, n = int(m.group(1)), int(m.group(2))
        if k != len(declared) + 1:
            raise ArpaFormatError(lineno, f"expected 'ngram {len(declared) + 1}=', got {text!r}")
        declared[k] = n
        item = next_nonblank()
    if not declared:
        raise ArpaFormatError(item[0] if item else None, "no 'ngram k=count' lines in header")
    order = len(declared)

    tables: list[dict] = []
    for k in range(1, order + 1):
        if item is None:
            raise ArpaFormatError(None, f"missing \\{k}-grams: section")
        lineno, text = item
        m = _SECTION.match(text)
        if not m or int(m.group(1)) != k:
            raise ArpaFormatError(lineno, f"expected \\{k}-grams:, got {text!r}")
        table: dict = {}
        while True:
            item = next_nonblank()
            if item is None or item[1].startswith("\\"):
                break
            lineno, text = item
            parts = text.split()
            if len(parts) not in (k + 1, k + 2):
                raise ArpaFormatError(lineno, f"{k}-gram entry has {len(parts)} fields")
            try:
                lp = float(parts[0])
                bo = float(parts[k + 1]) if len(parts) == k + 2 else 0.0
            except ValueError as exc:
                raise ArpaFormatError(lineno, f"bad number: {exc}") from None
            if len(parts) == k + 2 and k == order:
                raise ArpaFormatError(lineno, "backoff weight on highest-order n-gram")
            gram = tuple(parts[1:k + 1])
            if gram in table:
                raise ArpaFormatError(lineno, f"duplicate {k}-gram {' '.join(gram)!r}")
            if k > 1 and gram[1:] not in tables[k - 2]:
                raise ArpaFormatError(lineno, f"suffix of {' '.join(gram)!r} missing from order {k - 1}")
            table[gram] = (lp, bo)
        if len(table) != declared[k]:
            raise ArpaFormatError(
                lineno, f"header declares {declared[k]} {k}-grams, section has {len(table)}"
            )
        tables.append(table)

    if item is None or item[1] != "\\end\\":
        raise ArpaFormatError(item[0] if item else len(lines), "missing \\end\\ terminator")

    unigrams = tables[0]
    for sentinel in (EOS, UNK):
        if (sentinel,) not in unigrams:
            raise ArpaFormatError(None, f"unigram section lacks {sentinel}")
    if (BOS,) not in unigrams and order > 1:
        raise ArpaFormatError(None, f"unigram section lacks {BOS}")
    for k in range(2, order + 1):
        for gram in tables[k - 1]:
            if gram[:-1] not in tables[k - 2]:
                raise ArpaFormatError(None, f"context of {' '.join(gram)!r} missing from order {k - 1}")
    return KneserNeyModel(order, tables, {"source": str(path)})
