import json
import random

import pytest
from hypothesis import given, strategies as st

from chitab.geometry import BBox
from chitab.harness import (InsufficientTables, MissingRuns, OrphanResponses, ResponseRecord, parse_answer,
                            per_table_solve_rate, read_responses, sample_tuning_subset, score, solve_rate_csv,
                            stability)
from chitab.ingest import Split
from chitab.qa import PromptStyle, QARecord, QuestionType


def gold_rec(qid, answer, qtype="SHQA", table=None):
    return QARecord(qid, table or qid.split("#")[0], Split.VALID, "x.jpg", "h", BBox(0, 0, 1, 1),
                    QuestionType(qtype), answer, {})


def resp(qid, text, group="m", run=0, style=PromptStyle.BASE, error=None):
    return ResponseRecord(qid, group, run, style, text, None, None, error)


@pytest.mark.parametrize("text, strict, expected", [
    ("3", True, 3),
    ("There are 3 sub-headings.", False, 3),
    ("There are 3 sub-headings.", True, None),
    ("three", False, None),
    ("three", True, None),
    (" 12\n", True, 12),
    ("Answer: **4**", False, 4),
    ("3.5 columns", False, None),
    ("the 2nd level has 5", False, 5),
    ("", False, None),
])
def test_parse_answer(text, strict, expected):
    assert parse_answer(text, strict) == expected


@given(st.text())
def test_lenient_accepts_whatever_strict_accepts(text):
    s = parse_answer(text, True)
    if s is not None:
        assert parse_answer(text, False) == s


def test_score_single_run_fraction():
    gold = [gold_rec(f"t{i}#n0#SH", 2) for i in range(20)]
    responses = [resp(g.question_id, "2" if i < 11 else "5") for i, g in enumerate(gold)]
    (rep,) = score(responses, gold)
    assert rep.overall == 55.0
    assert rep.accuracy[QuestionType.SHQA] == 55.0
    assert rep.n[QuestionType.SHQA] == 20


def test_score_runs_give_partial_credit():
    gold = [gold_rec("a#n0#SH", 3)]
    rs = [resp("a#n0#SH", t, run=k) for k, t in enumerate(["3", "3", "4"])]
    (rep,) = score(rs, gold)
    assert rep.overall == pytest.approx(100 * 2 / 3)


def test_score_empty_responses_zero():
    gold = [gold_rec(f"t{i}#n0#VL", 2, "VLQA") for i in range(5)]
    (rep,) = score([resp(g.question_id, "") for g in gold], gold)
    assert rep.overall == 0.0 and rep.accuracy[QuestionType.VLQA] == 0.0


def test_score_orphan_lists_offenders():
    with pytest.raises(OrphanResponses) as exc:
        score([resp("nope#n0#SH", "1"), resp("a#n0#SH", "1")], [gold_rec("a#n0#SH", 1)])
    assert exc.value.ids == ["nope#n0#SH"]


def test_overall_is_weighted_by_type_counts():
    gold = [gold_rec(f"s{i}#n0#SH", 1) for i in range(3)] + [gold_rec(f"v{i}#n0#VL", 1, "VLQA") for i in range(1)]
    rs = [resp("s0#n0#SH", "1"), resp("s1#n0#SH", "0"), resp("s2#n0#SH", "0"), resp("v0#n0#VL", "1")]
    (rep,) = score(rs, gold)
    sh, vl = rep.accuracy[QuestionType.SHQA], rep.accuracy[QuestionType.VLQA]
    assert rep.overall == pytest.approx((sh * 3 + vl * 1) / 4) == pytest.approx(50.0)


def test_score_groups_and_styles_separately():
    gold = [gold_rec("a#n0#SH", 1)]
    rs = [resp("a#n0#SH", "1", "g1"), resp("a#n0#SH", "0", "g2"),
          resp("a#n0#SH", "0", "g1", style=PromptStyle.REWARD)]
    reps = {(r.group, r.prompt_style): r.overall for r in score(rs, gold)}
    assert reps == {("g1", PromptStyle.BASE): 100.0, ("g1", PromptStyle.REWARD): 0.0, ("g2", PromptStyle.BASE): 0.0}


def test_failed_requests_skipped_unless_counted():
    gold = [gold_rec("a#n0#SH", 1), gold_rec("b#n0#SH", 1)]
    rs = [resp("a#n0#SH", "1"), resp("b#n0#SH", "", error="timeout")]
    assert score(rs, gold)[0].overall == 100.0
    assert score(rs, gold, count_failures=True)[0].overall == 50.0


def _random_responses(r, gold, runs=1):
    return [resp(g.question_id, r.choice(["1", "2", "The answer is 2", "two", "2.", "x 3"]), run=k)
            for g in gold for k in range(runs)]


def test_score_invariants():
    r = random.Random(0)
    gold = [gold_rec(f"t{i}#n0#SH", r.randint(1, 3)) for i in range(40)]
    for _ in range(50):
        rs = _random_responses(r, gold)
        base = score(rs, gold)[0].overall
        shuffled = rs[:]
        r.shuffle(shuffled)
        assert score(shuffled, gold)[0].overall == base
        naive = 100 * sum(parse_answer(x.raw_text) == g.answer for x, g in zip(rs, gold)) / len(gold)
        assert base == pytest.approx(naive)
        assert score(rs, gold, strict=False)[0].overall >= score(rs, gold, strict=True)[0].overall


def _stability_fixture(n_questions, n_unstable, runs=29):
    rs = []
    for q in range(n_questions):
        for k in range(runs):
            text = "4" if (q < n_unstable and k == runs - 1) else "3"
            rs.append(resp(f"t{q}#n0#SH", text, run=k))
    return rs


@pytest.mark.parametrize("unstable, pct", [(0, 100.0), (1, 95.0), (9, 55.0), (20, 0.0)])
def test_stability_table_rows(unstable, pct):
    rep = stability(_stability_fixture(20, unstable))
    assert rep.unstable_questions == unstable
    assert rep.stability_pct == pct
    assert rep.stability_pct + 100 * rep.unstable_questions / rep.n_questions == 100


def test_stability_single_odd_run_is_unstable():
    rep = stability(_stability_fixture(1, 1))
    assert rep.unstable_questions == 1


def test_stability_empty_answer_is_a_value():
    rs = [resp("a#n0#SH", "3" if k else "no idea", run=k) for k in range(29)]
    assert stability(rs).unstable_questions == 1
    rs = [resp("a#n0#SH", "no idea", run=k) for k in range(29)]
    assert stability(rs).unstable_questions == 0


def test_stability_missing_runs():
    rs = _stability_fixture(2, 0)[:-1]
    with pytest.raises(MissingRuns) as exc:
        stability(rs)
    assert (exc.value.question_id, exc.value.got, exc.value.expected) == ("t1#n0#SH", 28, 29)


def test_stability_reports_mean_accuracy():
    gold = [gold_rec(f"t{q}#n0#SH", 3) for q in range(20)]
    rep = stability(_stability_fixture(20, 9), gold=gold)
    assert rep.mean_accuracy == pytest.approx(100 * (11 + 9 * 28 / 29) / 20)


def test_solve_rates():
    gold = [gold_rec(f"T#n{k}#SH", 1, table="T") for k in range(4)] + [gold_rec("U#n0#SH", 1, table="U")]
    rs = [resp(g.question_id, "1", group) for g in gold[:4] for group in "abcd"]
    rs += [resp("U#n0#SH", "0", group) for group in "abcd"]
    rates = per_table_solve_rate(rs, gold)
    assert rates == {"T": 1.0, "U": 0.0}
    assert solve_rate_csv(rates) == "table_id,solve_rate\nT,1.0\nU,0.0\n"


def test_solve_rates_match_brute_force():
    r = random.Random(6)
    gold = [gold_rec(f"T{t}#n{k}#SH", r.randint(1, 3), table=f"T{t}") for t in range(10) for k in range(r.randint(1, 4))]
    rs = [resp(g.question_id, str(r.randint(1, 3)), group) for g in gold for group in ("a", "b", "c")]
    rates = per_table_solve_rate(rs, gold)
    by_id = {g.question_id: g for g in gold}
    for t, rate in rates.items():
        pairs = [x for x in rs if by_id[x.question_id].table_id == t]
        assert rate == pytest.approx(sum(parse_answer(x.raw_text) == by_id[x.question_id].answer for x in pairs)
                                     / len(pairs))


def _subset_gold(n_tables, per_table=3):
    out = []
    for t in range(n_tables):
        for k in range(per_table):
            out.append(gold_rec(f"T{t:03d}#n{k}#SH", 1, "SHQA", f"T{t:03d}"))
            out.append(gold_rec(f"T{t:03d}#n{k}#VL", 1, "VLQA", f"T{t:03d}"))
    return out


def test_sample_subset_small():
    gold = _subset_gold(5)
    ids = sample_tuning_subset(gold, 2, seed=1)
    assert len(ids) == 4 and ids == sorted(ids)
    by_id = {g.question_id: g for g in gold}
    for qtype in QuestionType:
        tables = [by_id[i].table_id for i in ids if by_id[i].qtype is qtype]
        assert len(tables) == 2 == len(set(tables))
    assert sample_tuning_subset(gold, 2, seed=1) == ids
    shuffled = gold[:]
    random.Random(0).shuffle(shuffled)
    assert sample_tuning_subset(shuffled, 2, seed=1) == ids


def test_sample_subset_at_valid_split_scale():
    gold = _subset_gold(2325, per_table=1)
    ids = sample_tuning_subset(gold, 1250, seed=0)
    assert len(ids) == 2500


def test_sample_subset_insufficient():
    with pytest.raises(InsufficientTables, match="only 5"):
        sample_tuning_subset(_subset_gold(5), 6)


def test_response_file_round_trip(tmp_path):
    rs = [resp("a#n0#SH", "3", run=k) for k in range(3)]
    path = tmp_path / "r.jsonl"
    path.write_text("".join(json.dumps(x.to_dict()) + "\n" for x in rs))
    assert read_responses(path) == rs
    path.write_text(path.read_text() + json.dumps(rs[0].to_dict()) + "\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_responses(path)
