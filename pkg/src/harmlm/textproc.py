"""Text normalization and tokenization.

Two entry points: :func:`lm_tokenize`, the fixed tokenizer used for
language-model training and scoring, and :class:`Pipeline`, a configurable
chain of steps used by the classifier baselines.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

# A token is a run of word characters or a run of anything that is neither
# word nor whitespace (punctuation, symbols, emoji).
TOKEN_RE = re.compile(r"\w+|[^\w\s]+")
URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
SPECIAL_RE = re.compile(r"[^\w\s]+")


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def lm_tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and separate punctuation runs."""
    return TOKEN_RE.findall(text.lower())


_VOWELS = set("aeiouy")


def _has_vowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)


# (suffix, replacement, minimum stem length); first match wins.
_SUFFIX_RULES = (
    ("ational", "ate", 2),
    ("ization", "ize", 2),
    ("fulness", "ful", 2),
    ("ousness", "ous", 2),
    ("iveness", "ive", 2),
    ("tional", "tion", 2),
    ("biliti", "ble", 2),
    ("ements", "", 3),
    ("ement", "", 3),
    ("ments", "", 3),
    ("ment", "", 3),
    ("ingly", "", 3),
    ("edly", "", 3),
    ("ness", "", 3),
    ("sses", "ss", 1),
    ("ies", "y", 2),
    ("ing", "", 3),
    ("ed", "", 3),
    ("ly", "", 3),
    ("s", "", 3),
)


def stem(token: str) -> str:
    """Strip one common English suffix (a small Porter-like rule set).

    Tokens that are not purely alphabetic are returned unchanged, and a
    suffix is only removed when the remaining stem keeps a vowel.
    """
    if not token.isalpha() or len(token) <= 3:
        return token
    for suffix, repl, min_len in _SUFFIX_RULES:
        if token.endswith(suffix):
            base = token[: -len(suffix)]
            if suffix == "s" and token.endswith(("ss", "us", "is")):
                return token
            if len(base) >= min_len and _has_vowel(base):
                return base + repl
            return token
    return token


def load_stopwords(path: str | Path) -> frozenset[str]:
    with Path(path).open(encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def load_emoji_map(path: str | Path) -> dict[str, str]:
    """Read a ``emoji<TAB>alias`` file. Aliases get wrapped in colons if bare."""
    mapping = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1].strip():
                raise ValueError(f"{path}:{lineno}: expected 'emoji<TAB>alias'")
            alias = parts[1].strip()
            if not (alias.startswith(":") and alias.endswith(":")):
                alias = f":{alias}:"
            mapping[parts[0]] = alias
    return mapping


class EmojiReplacer:
    """Replace emoji sequences inside tokens; longest sequence wins."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)
        keys = sorted(self.mapping, key=len, reverse=True)
        self._re = re.compile("|".join(re.escape(k) for k in keys)) if keys else None

    def __call__(self, tokens: list[str]) -> list[str]:
        if self._re is None:
            return tokens
        sub = self._re.sub
        repl = lambda m: self.mapping[m.group(0)]  # noqa: E731
        return [sub(repl, t) for t in tokens]


TEXT_STEPS = {"lowercase", "strip_urls", "strip_special_chars"}
TOKEN_STEPS = {"lowercase", "remove_stopwords", "replace_emoji", "stem"}
FILE_STEPS = {"remove_stopwords", "replace_emoji"}


@dataclass(frozen=True)
class Step:
    name: str
    path: str | None = None


class Pipeline:
    """An immutable, validated sequence of preprocessing steps.

    Steps before ``tokenize`` act on the raw string, steps after it on the
    token list. Resource files are read once, here, so a missing stopword
    or emoji file fails at load time rather than on the first document.
    """

    def __init__(self, steps: Sequence[Step | str | dict]):
        self.steps = tuple(_coerce_step(s) for s in steps)
        names = [s.name for s in self.steps]
        if names.count("tokenize") != 1:
            raise ValueError("pipeline must contain 'tokenize' exactly once")
        cut = names.index("tokenize")
        self._text_ops: list[Callable[[str], str]] = []
        self._token_ops: list[Callable[[list[str]], list[str]]] = []
        for i, step in enumerate(self.steps):
            if i < cut:
                if step.name not in TEXT_STEPS:
                    raise ValueError(f"step {step.name!r} cannot run before tokenize")
                self._text_ops.append(_text_op(step))
            elif i > cut:
                if step.name not in TOKEN_STEPS:
                    raise ValueError(f"step {step.name!r} cannot run after tokenize")
                self._token_ops.append(_token_op(step))

    @classmethod
    def from_file(cls, path: str | Path) -> Pipeline:
        """Load ``{"steps": [...]}``; relative resource paths resolve
        against the config file's directory."""
        path = Path(path)
        cfg = json.loads(path.read_text(encoding="utf-8"))
        steps = []
        for raw in cfg["steps"]:
            step = _coerce_step(raw)
            if step.path is not None and not Path(step.path).is_absolute():
                step = Step(step.name, str(path.parent / step.path))
            steps.append(step)
        return cls(steps)

    def __call__(self, text: str) -> list[str]:
        for op in self._text_ops:
            text = op(text)
        tokens = tokenize(text)
        for op in self._token_ops:
            tokens = op(tokens)
        return tokens

    def to_config(self) -> dict:
        return {"steps": [s.name if s.path is None else {s.name: s.path} for s in self.steps]}


def run_pipeline(text: str, config: Pipeline | Sequence) -> list[str]:
    pipeline = config if isinstance(config, Pipeline) else Pipeline(config)
    return pipeline(text)


def _coerce_step(raw: Step | str | dict) -> Step:
    if isinstance(raw, Step):
        step = raw
    elif isinstance(raw, str):
        step = Step(raw)
    elif isinstance(raw, dict) and len(raw) == 1:
        ((name, path),) = raw.items()
        step = Step(name, str(path))
    else:
        raise ValueError(f"bad pipeline step {raw!r}")
    known = TEXT_STEPS | TOKEN_STEPS | {"tokenize"}
    if step.name not in known:
        raise ValueError(f"unknown pipeline step {step.name!r}")
    if step.name in FILE_STEPS and step.path is None:
        raise ValueError(f"step {step.name!r} needs a file path")
    return step


def _text_op(step: Step) -> Callable[[str], str]:
    if step.name == "lowercase":
        return str.lower
    if step.name == "strip_urls":
        return lambda s: URL_RE.sub(" ", s)
    return lambda s: SPECIAL_RE.sub(" ", s)


def _token_op(step: Step) -> Callable[[list[str]], list[str]]:
    if step.name == "lowercase":
        return lambda toks: [t.lower() for t in toks]
    if step.name == "stem":
        return lambda toks: [stem(t) for t in toks]
    if step.name == "remove_stopwords":
        stop = load_stopwords(step.path)
        return lambda toks: [t for t in toks if t.lower() not in stop]
    return EmojiReplacer(load_emoji_map(step.path))
