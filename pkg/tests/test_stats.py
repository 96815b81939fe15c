import math
import random

import numpy as np
import pytest

from chitab.geometry import BBox
from chitab.ingest import Split
from chitab.qa import QARecord, QuestionType
from chitab.stats import (RunningStats, answer_stats, combine, coverage, histogram_csv,
                          questions_per_table_histogram, render_text, round_half_up)


def rec(table, qtype, answer, split="train", k=0):
    return QARecord(f"{table}#n{k}#{qtype[:2]}", table, Split.parse(split), "x.jpg", "h", BBox(0, 0, 1, 1),
                    QuestionType(qtype), answer, {})


@pytest.mark.parametrize("label, n_in, kept, pct", [
    ("train", 758849, 18909, "2.49"),
    ("val", 94959, 2325, "2.45"),
    ("test", 93834, 2428, "2.59"),
    ("test", 10, 10, "100.00"),
])
def test_coverage_rows(label, n_in, kept, pct):
    (s,) = coverage({label: {"tables_in": n_in, "tables_kept": kept}})
    assert (s.tables_in, s.tables_kept) == (n_in, kept)
    assert round_half_up(s.coverage_pct) == pct
    assert abs(s.coverage_pct - 100 * kept / n_in) < 0.005


def test_coverage_rejects_unknown_split():
    with pytest.raises(ValueError):
        coverage({"dev": {"tables_in": 1, "tables_kept": 0}})


def test_round_half_up():
    assert round_half_up(2.445) == "2.45"
    assert round_half_up(2.5875) == "2.59"


def test_answer_stats_constant_and_pair():
    acc = answer_stats([rec(f"t{i}", "SHQA", 5) for i in range(7)])
    sh = acc[Split.TRAIN][QuestionType.SHQA]
    assert (sh.n, sh.mean, sh.std) == (7, 5.0, 0.0)
    acc = answer_stats([rec("a", "VLQA", 2), rec("b", "VLQA", 4)])
    vl = acc[Split.TRAIN][QuestionType.VLQA]
    assert vl.mean == 3.0 and vl.std == 1.0


def test_empty_split_is_absent():
    acc = answer_stats([rec("a", "SHQA", 2, "test")])
    assert Split.TRAIN not in acc
    rows = combine({"train": {"tables_in": 3, "tables_kept": 0}}, [rec("a", "SHQA", 2, "test")])
    train = next(s for s in rows if s.split is Split.TRAIN)
    assert train.shqa_mean is None and train.questions == 0
    test = next(s for s in rows if s.split is Split.TEST)
    assert test.vlqa_mean is None and test.shqa_mean == 2.0


def test_streaming_std_matches_two_pass():
    x = np.random.default_rng(0).normal(3.3, 2.1, size=1_000_000)
    s = RunningStats()
    for v in x.tolist():
        s.push(v)
    assert s.n == x.size
    assert math.isclose(s.mean, float(np.mean(x)), rel_tol=1e-9)
    assert math.isclose(s.std, float(np.std(x)), rel_tol=1e-9)


def test_merge_is_associative_with_streaming():
    r = random.Random(3)
    xs = [r.gauss(0, 5) for _ in range(3000)]
    parts = [RunningStats() for _ in range(3)]
    for i, v in enumerate(xs):
        parts[i % 3].push(v)
    whole = RunningStats()
    for v in xs:
        whole.push(v)
    a = parts[0].merge(parts[1]).merge(parts[2])
    b = parts[0].merge(parts[1].merge(parts[2]))
    for m in (a, b):
        assert m.n == whole.n
        assert math.isclose(m.mean, whole.mean, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(m.std, whole.std, rel_tol=1e-9)
    assert RunningStats().merge(whole) == whole


def test_histogram_examples():
    records = [rec("a", "SHQA", 1, k=k) for k in range(2)] + [rec("b", "VLQA", 1, k=k) for k in range(2)] \
        + [rec("c", "SHQA", 1, k=k) for k in range(6)]
    hist = questions_per_table_histogram(records)
    assert hist == {2: 2, 6: 1}
    assert histogram_csv(hist) == "bucket,count\n2,2\n6,1\n"


def test_histogram_matches_group_by_and_totals():
    r = random.Random(4)
    records = []
    for t in range(300):
        for k in range(2 * r.randint(1, 9)):
            records.append(rec(f"t{t}", r.choice(["SHQA", "VLQA"]), r.randint(1, 9), r.choice(["train", "val"]), k))
    counts = {}
    for x in records:
        counts[x.table_id] = counts.get(x.table_id, 0) + 1
    expected = {}
    for v in counts.values():
        expected[v] = expected.get(v, 0) + 1
    hist = questions_per_table_histogram(records)
    assert hist == expected
    assert sum(b * c for b, c in hist.items()) == len(records)
    assert sum(s.questions for s in combine(None, records)) == len(records)


def test_render_text_aligns_columns():
    out = render_text(combine({"train": {"tables_in": 758849, "tables_kept": 18909}},
                              [rec("a", "SHQA", 2), rec("a", "VLQA", 4, k=1)]))
    lines = out.splitlines()
    assert len({len(x) for x in lines}) == 1
    assert "2.49" in lines[1] and "2.00±0.00" in lines[1]
