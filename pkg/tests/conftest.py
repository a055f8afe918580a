from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

import desk_corpora
from harmlm import cli


def write_jsonl(path: Path, records) -> Path:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write((rec if isinstance(rec, str) else json.dumps(rec, ensure_ascii=False)) + "\n")
    return Path(path)


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def random_corpus(seed: int, n_tokens: int = 200, vocab: int = 12) -> list[list[str]]:
    """Short documents over a small Zipf-ish vocabulary, about ``n_tokens`` in total."""
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(vocab)]
    weights = [1.0 / (i + 1) for i in range(vocab)]
    docs, left = [], n_tokens
    while left > 0:
        n = min(left, rng.randint(1, 12))
        docs.append(rng.choices(words, weights, k=n))
        left -= n
    return docs


@pytest.fixture
def run_cli(capsys):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""

    def run(*argv):
        code = cli.main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return run


@pytest.fixture(scope="session")
def desk_dir(tmp_path_factory) -> Path:
    """The two desk corpora, built once per session."""
    d = tmp_path_factory.mktemp("desk")
    desk_corpora.build(d)
    return d


# acceptance results, printed as one PASS/FAIL line each at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
