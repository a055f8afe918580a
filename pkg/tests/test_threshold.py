import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmlm.corpus import Label
from harmlm.ngram import PerplexityScore
from harmlm.threshold import classify_by_threshold, summarize_distributions, sweep_thresholds
from oracles import f1_macro_exhaustive

H, N = Label.HARMFUL, Label.NON_HARMFUL


def _scores(ppls, labels):
    return [(PerplexityScore(f"d{i}", 0.0, 1, p), lab) for i, (p, lab) in enumerate(zip(ppls, labels))]


def test_odd_count_quartiles():
    h, n = summarize_distributions(_scores([1, 2, 3, 4, 5, 9], [H] * 5 + [N]))
    assert (h.min, h.q1, h.median, h.q3, h.max) == (1, 2, 3, 4, 5)
    assert h.count == 5 and n.count == 1


def test_single_score_per_class():
    h, n = summarize_distributions(_scores([3.0, 7.0], [H, N]))
    assert h.min == h.q1 == h.median == h.q3 == h.max == 3.0
    assert n.min == n.q1 == n.median == n.q3 == n.max == 7.0


def test_eight_value_quartiles():
    # positions (n-1)q over sorted [1,2,4,7,11,16,22,29]: 1.75, 3.5, 5.25
    vals = [16, 1, 29, 4, 11, 2, 22, 7]
    h, _ = summarize_distributions(_scores(vals + [100], [H] * 8 + [N]))
    assert h.q1 == pytest.approx(2 + 0.75 * (4 - 2))
    assert h.median == pytest.approx((7 + 11) / 2)
    assert h.q3 == pytest.approx(16 + 0.25 * (22 - 16))


def test_summary_needs_both_classes():
    with pytest.raises(ValueError):
        summarize_distributions(_scores([1, 2], [H, H]))


def test_separated_classes_reach_f1_one():
    rep = sweep_thresholds(_scores([1, 2, 3, 10, 11, 12], [H, H, H, N, N, N]), grid_size=100)
    best = rep.point(rep.selected.argmax_f1)
    assert best.f1_macro == 1.0
    assert 3 <= rep.selected.argmax_f1 < 10
    assert rep.selected.max_harmful == 3


def test_six_point_overlap_matches_exhaustive():
    ppl = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    lab = [H, H, N, H, N, N]
    rep = sweep_thresholds(_scores(ppl, lab), grid_size=100)
    harmful = [x is H for x in lab]
    for p in rep.grid:
        assert p.f1_macro == pytest.approx(f1_macro_exhaustive(ppl, harmful, p.theta), abs=1e-15)
    # best by hand: theta in [2, 3) or [4, 5) gives F1s 4/5 and 6/7
    assert rep.point(rep.selected.argmax_f1).f1_macro == pytest.approx((4 / 5 + 6 / 7) / 2, abs=1e-15)
    assert 2.0 <= rep.selected.argmax_f1 < 3.0


def test_grid_strictly_increasing_and_bounded():
    rng = random.Random(0)
    ppl = [rng.lognormvariate(3, 1) for _ in range(300)]
    lab = [H if rng.random() < 0.4 else N for _ in ppl]
    rep = sweep_thresholds(_scores(ppl, lab), grid_size=100)
    thetas = [p.theta for p in rep.grid]
    assert len(thetas) == 100
    assert all(a < b for a, b in zip(thetas, thetas[1:]))
    for p in rep.grid:
        for m in (p.f1_macro, p.f1_harmful, p.f1_non_harmful, p.accuracy):
            assert 0 <= m <= 1


def test_grid_deduplicates_ties():
    rep = sweep_thresholds(_scores([5.0] * 20, [H] * 10 + [N] * 10), grid_size=100)
    assert [p.theta for p in rep.grid] == [5.0]


def test_argmax_tie_breaks_low():
    # every threshold in [2, 3) separates; the grid holds several of them
    ppl = [1, 2, 3, 3]
    rep = sweep_thresholds(_scores(ppl, [H, H, N, N]), grid_size=10)
    tied = [p.theta for p in rep.grid if p.f1_macro == 1.0]
    assert rep.selected.argmax_f1 == min(tied)


def test_steepest_step():
    # harmful below 10, non-harmful above; the biggest jump is where the
    # grid crosses from the harmful block into the non-harmful block
    ppl = list(range(1, 11)) + list(range(100, 110))
    lab = [H] * 10 + [N] * 10
    rep = sweep_thresholds(_scores(ppl, lab), grid_size=19)
    curves = np.array([[p.f1_macro, p.f1_harmful, p.f1_non_harmful, p.accuracy] for p in rep.grid])
    jumps = np.abs(np.diff(curves, axis=0)).sum(axis=1)
    assert rep.selected.steepest_step == rep.grid[int(np.argmax(jumps)) + 1].theta


def test_sweep_errors():
    with pytest.raises(ValueError):
        sweep_thresholds(_scores([1, 2], [H, H]))
    with pytest.raises(ValueError):
        sweep_thresholds(_scores([1, 2], [H, N]), grid_size=1)
    with pytest.raises(ValueError):
        sweep_thresholds(_scores([1, math.inf], [H, N]))


def test_report_serialization(tmp_path):
    rep = sweep_thresholds(_scores([1, 2, 5, 6], [H, N, H, N]), grid_size=4)
    rep.write_json(tmp_path / "r.json")
    rep.write_tsv(tmp_path / "r.tsv")
    d = json.loads((tmp_path / "r.json").read_text())
    assert set(d["selected"]) == {"argmax_f1", "max_harmful", "steepest_step"}
    assert d["grid"][0].keys() == {"theta", "f1_macro", "f1_harmful", "f1_non_harmful", "accuracy"}
    rows = (tmp_path / "r.tsv").read_text().splitlines()
    assert rows[0].split("\t")[0] == "theta" and len(rows) == len(rep.grid) + 1


def test_classify_examples():
    s = [PerplexityScore("a", 0, 1, 4.0), PerplexityScore("b", 0, 1, 4.22), PerplexityScore("c", 0, 1, 9.0)]
    assert classify_by_threshold(s, 4.22) == [("a", H), ("b", H), ("c", N)]
    assert all(lab is N for _, lab in classify_by_threshold(s, 1.0))


@pytest.mark.parametrize("theta", [0.0, -1.0, math.nan, math.inf])
def test_classify_rejects_bad_theta(theta):
    with pytest.raises(ValueError):
        classify_by_threshold([PerplexityScore("a", 0, 1, 4.0)], theta)


ppl_lists = st.lists(st.floats(1.0, 1e6, allow_nan=False), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(ppl_lists, st.floats(1.0, 1e6), st.floats(1.0, 1e6))
def test_monotone_in_theta(ppl, t1, t2):
    lo, hi = sorted((t1, t2))
    s = [PerplexityScore(str(i), 0, 1, p) for i, p in enumerate(ppl)]
    n_lo = sum(lab is H for _, lab in classify_by_threshold(s, lo))
    n_hi = sum(lab is H for _, lab in classify_by_threshold(s, hi))
    assert n_lo <= n_hi


@settings(max_examples=200, deadline=None)
@given(ppl_lists, st.floats(1.0, 1e4), st.sampled_from([0.5, 2.0, 4.0, 1024.0]))
def test_scale_equivariance(ppl, theta, k):
    # powers of two keep the float products exact, so ties stay ties
    s = [PerplexityScore(str(i), 0, 1, p) for i, p in enumerate(ppl)]
    scaled = [PerplexityScore(str(i), 0, 1, p * k) for i, p in enumerate(ppl)]
    assert classify_by_threshold(s, theta) == classify_by_threshold(scaled, theta * k)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1.0, 100.0), st.booleans()), min_size=2, max_size=80), st.integers(2, 120))
def test_argmax_matches_exhaustive(points, grid):
    ppl = [p for p, _ in points]
    harmful = [h for _, h in points]
    if all(harmful) or not any(harmful):
        return
    rep = sweep_thresholds(_scores(ppl, [H if h else N for h in harmful]), grid_size=grid)
    values = [f1_macro_exhaustive(ppl, harmful, p.theta) for p in rep.grid]
    best = max(values)
    assert rep.selected.argmax_f1 == rep.grid[values.index(best)].theta
