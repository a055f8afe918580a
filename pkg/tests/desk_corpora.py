"""Two topically distinct desk-scale corpora built from files on this machine.

* class A (stands in for harmful text): Debian package copyright and
  license notices under /usr/share/doc, falling back to the LICENSE files
  shipped in installed Python distributions;
* class B: docstrings of the Python standard library.

Both are public text. Documents are paragraph groups of 300-2000
characters, exact duplicates removed, collected in sorted file order so
the result is stable for a given machine. Written as OSCAR-style
JSONLines; class A documents carry the ``adult`` annotation.

Run ``python tests/desk_corpora.py OUT_DIR`` to materialize them.
"""

from __future__ import annotations

import ast
import glob
import json
import re
import sys
import sysconfig
from pathlib import Path

MIN_CHARS = 300
MAX_CHARS = 2000
TARGET_BYTES = 1_500_000


def _paragraph_docs(text: str) -> list[str]:
    docs, cur = [], ""
    for para in re.split(r"\n\s*\n", text):
        para = " ".join(para.split())
        if not para:
            continue
        cur = f"{cur} {para}".strip() if cur else para
        if len(cur) >= MIN_CHARS:
            docs.append(cur[:MAX_CHARS])
            cur = ""
    return docs


def _collect(texts, target: int) -> list[str]:
    seen, out, size = set(), [], 0
    for text in texts:
        for doc in _paragraph_docs(text):
            if doc in seen:
                continue
            seen.add(doc)
            out.append(doc)
            size += len(doc.encode("utf-8"))
            if size >= target:
                return out
    return out


def _license_texts():
    paths = sorted(glob.glob("/usr/share/doc/*/copyright"))
    paths += sorted(glob.glob(str(Path(sysconfig.get_paths()["purelib"]) / "*.dist-info" / "LICENSE*")))
    for p in paths:
        try:
            yield Path(p).read_text(encoding="utf-8", errors="replace")
        except OSError:
            continue


def _docstring_texts():
    stdlib = Path(sysconfig.get_paths()["stdlib"])
    for p in sorted(stdlib.rglob("*.py")):
        rel = p.relative_to(stdlib).parts
        if rel[0] in ("test", "site-packages", "dist-packages", "idlelib", "lib2to3") or "tests" in rel:
            continue
        try:
            tree = ast.parse(p.read_text(encoding="utf-8"))
        except (SyntaxError, UnicodeDecodeError, ValueError, OSError):
            continue
        chunks = []
        for node in ast.walk(tree):
            if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
                doc = ast.get_docstring(node)
                if doc:
                    chunks.append(doc)
        if chunks:
            yield "\n\n".join(chunks)


def build(out_dir: str | Path, target_bytes: int = TARGET_BYTES) -> tuple[Path, Path]:
    """Write ``class_a.jsonl`` and ``class_b.jsonl`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    a = _collect(_license_texts(), target_bytes)
    b = _collect(_docstring_texts(), target_bytes)
    paths = []
    for name, docs, ann in (("class_a.jsonl", a, ["adult"]), ("class_b.jsonl", b, None)):
        path = out_dir / name
        with path.open("w", encoding="utf-8") as fh:
            for i, doc in enumerate(docs):
                rec = {"id": f"{name[:-6]}-{i:05d}", "content": doc}
                if ann:
                    rec["metadata"] = {"annotation": ann}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        paths.append(path)
    return paths[0], paths[1]


if __name__ == "__main__":
    for p in build(sys.argv[1] if len(sys.argv) > 1 else "desk_corpora"):
        print(p, p.stat().st_size)
