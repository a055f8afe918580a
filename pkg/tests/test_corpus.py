import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import write_jsonl
from harmlm.corpus import (
    Document,
    Label,
    LabelRule,
    filter_by_annotation,
    read_jsonlines,
    split_dataset,
    write_jsonlines,
)


def test_adult_annotation_means_harmful(tmp_path):
    p = write_jsonl(tmp_path / "a.jsonl", [{"content": "hello", "metadata": {"annotation": ["adult"]}}])
    (doc,) = read_jsonlines(p, LabelRule.FROM_ADULT_ANNOTATION)
    assert doc.gold_label is Label.HARMFUL
    assert doc.annotations == frozenset({"adult"})


def test_absent_annotation_means_non_harmful(tmp_path):
    p = write_jsonl(tmp_path / "a.jsonl", [{"content": "hello"}])
    (doc,) = read_jsonlines(p, LabelRule.FROM_ADULT_ANNOTATION)
    assert doc.gold_label is Label.NON_HARMFUL


def test_fixed_rules_and_none(tmp_path):
    p = write_jsonl(tmp_path / "a.jsonl", [{"content": "x", "metadata": {"annotation": ["adult"]}}])
    assert read_jsonlines(p, LabelRule.FIXED_NON_HARMFUL)[0].gold_label is Label.NON_HARMFUL
    assert read_jsonlines(p, LabelRule.FIXED_HARMFUL)[0].gold_label is Label.HARMFUL
    assert read_jsonlines(p)[0].gold_label is None


def test_malformed_line_skipped_and_counted(tmp_path):
    p = write_jsonl(tmp_path / "a.jsonl", [{"content": "one"}, '{"content": "tw', {"content": "three"}])
    docs = read_jsonlines(p)
    assert [d.content for d in docs] == ["one", "three"]
    assert docs.skipped == 1


@pytest.mark.parametrize(
    "bad", ['["not", "an", "object"]', '{"content": 5}', '{"content": ""}', '{"text": "x"}']
)
def test_invalid_records_skipped(tmp_path, bad):
    p = write_jsonl(tmp_path / "a.jsonl", [bad, {"content": "ok"}])
    docs = read_jsonlines(p)
    assert len(docs) == 1 and docs.skipped == 1


def test_ids_synthesized_from_position(tmp_path):
    p = write_jsonl(tmp_path / "part.jsonl", [{"content": "a"}, "", {"content": "b", "id": "given"}])
    docs = read_jsonlines(p)
    assert [d.id for d in docs] == ["part.jsonl:1", "given"]
    assert docs[0].source == "part.jsonl"


def test_unreadable_file_is_fatal(tmp_path):
    with pytest.raises(OSError):
        read_jsonlines(tmp_path / "missing.jsonl")


def test_filter_by_annotation():
    d1 = Document("1", "x", frozenset({"adult"}))
    d2 = Document("2", "y")
    d3 = Document("3", "z", frozenset({"adult", "tiny"}))
    assert filter_by_annotation([d1, d2, d3], "adult") == [d1, d3]
    assert filter_by_annotation([], "adult") == []


def test_filter_counts_tagged_docs():
    tagged = [Document(str(i), "t", frozenset({"adult"} if i < 37 else set())) for i in range(100)]
    assert len(filter_by_annotation(tagged, "adult")) == 37


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sets(st.sampled_from(["adult", "short", "tiny"])), max_size=30), st.sampled_from(["adult", "tiny"]))
def test_filter_properties(anns, tag):
    docs = [Document(str(i), "t", frozenset(a)) for i, a in enumerate(anns)]
    out = filter_by_annotation(docs, tag)
    assert len(out) <= len(docs)
    assert all(tag in d.annotations for d in out)


def _docs(n):
    return [Document(f"d{i}", f"text {i}") for i in range(n)]


def test_split_sizes():
    s = split_dataset(_docs(10), (0.6, 0.2, 0.2), seed=7)
    assert (len(s.train), len(s.validation), len(s.test)) == (6, 2, 2)
    s = split_dataset(_docs(7), (0.5, 0.25, 0.25), seed=7)
    assert (len(s.train), len(s.validation), len(s.test)) == (3, 1, 3)


def test_split_deterministic():
    a = split_dataset(_docs(50), (0.6, 0.2, 0.2), seed=3)
    b = split_dataset(_docs(50), (0.6, 0.2, 0.2), seed=3)
    assert [d.id for d in a.train + a.validation + a.test] == [d.id for d in b.train + b.validation + b.test]


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.1), (0.5, 0.5, 0.0), (1.0, 0.0, 0.0), (0.5, 0.5)])
def test_split_rejects_bad_ratios(ratios):
    with pytest.raises(ValueError):
        split_dataset(_docs(10), ratios, seed=0)


def test_split_needs_three_docs():
    with pytest.raises(ValueError):
        split_dataset(_docs(2), (0.6, 0.2, 0.2), seed=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 200), st.integers(0, 2**32 - 1), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_split_is_partition(n, seed, a, b):
    if a + b >= 0.99:
        return
    ratios = (a, b, 1.0 - a - b)
    s = split_dataset(_docs(n), ratios, seed)
    ids = [d.id for d in s.train + s.validation + s.test]
    assert sorted(ids) == sorted(d.id for d in _docs(n))
    assert len(s.train) == int(n * a + 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1), min_size=1, max_size=20))
def test_reserialize_preserves_content(tmp_path_factory, contents):
    d = tmp_path_factory.mktemp("rt")
    docs = [Document(f"i{i}", c, frozenset({"adult"}) if i % 2 else frozenset()) for i, c in enumerate(contents)]
    write_jsonlines(docs, d / "out.jsonl")
    back = read_jsonlines(d / "out.jsonl")
    assert len(back) == len(docs)
    assert [x.content.encode() for x in back] == [x.content.encode() for x in docs]
    assert [x.annotations for x in back] == [x.annotations for x in docs]


def test_reserialize_file_round_trip(tmp_path):
    recs = [{"content": "ä ö ü"}, {"content": "line\nbreak", "metadata": {"annotation": ["adult"]}}]
    src = write_jsonl(tmp_path / "in.jsonl", recs)
    docs = read_jsonlines(src)
    write_jsonlines(docs, tmp_path / "out.jsonl")
    out = [json.loads(x) for x in (tmp_path / "out.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [o["content"] for o in out] == [r["content"] for r in recs]
