"""Answer scoring: exact-match accuracy, repetition stability, per-table solve rates."""

from __future__ import annotations

import json
import random
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .qa import PromptStyle, QARecord, QuestionType


class HarnessError(ValueError):
    pass


class OrphanResponses(HarnessError):
    def __init__(self, ids: Sequence[str]):
        self.ids = sorted(set(ids))
        shown = ", ".join(self.ids[:20]) + (" ..." if len(self.ids) > 20 else "")
        super().__init__(f"{len(self.ids)} response question_id(s) not in gold: {shown}")


class MissingRuns(HarnessError):
    def __init__(self, question_id: str, got: int, expected: int):
        self.question_id, self.got, self.expected = question_id, got, expected
        super().__init__(f"question {question_id}: got {got} runs, expected {expected}")


class InsufficientTables(HarnessError):
    pass


@dataclass(frozen=True)
class ResponseRecord:
    question_id: str
    group: str
    run_index: int
    prompt_style: PromptStyle
    raw_text: str
    parsed_answer: int | None = None
    timestamp: str | None = None
    error: str | None = None

    def __post_init__(self):
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")

    @property
    def key(self) -> tuple:
        return (self.question_id, self.group, self.run_index, self.prompt_style)

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "group": self.group,
            "run_index": self.run_index,
            "prompt_style": self.prompt_style.value,
            "raw_text": self.raw_text,
            "parsed_answer": self.parsed_answer,
            "timestamp": self.timestamp,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ResponseRecord:
        return cls(
            question_id=str(d["question_id"]),
            group=str(d["group"]),
            run_index=int(d.get("run_index", 0)),
            prompt_style=PromptStyle.parse(d.get("prompt_style", "Base")),
            raw_text="" if d.get("raw_text") is None else str(d["raw_text"]),
            parsed_answer=d.get("parsed_answer"),
            timestamp=d.get("timestamp"),
            error=d.get("error"),
        )


def read_responses(path) -> list[ResponseRecord]:
    out = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                r = ResponseRecord.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise HarnessError(f"{path}:{lineno}: bad response record: {exc}") from None
            if r.key in seen:
                raise HarnessError(f"{path}:{lineno}: duplicate response {r.key}")
            seen.add(r.key)
            out.append(r)
    return out


_STRICT = re.compile(r"[+-]?\d+")
_TOKEN = re.compile(r"(?<![\w.,])[+-]?\d+(?![\w]|[.,]\d)")


def parse_answer(raw_text: str, strict: bool = False) -> int | None:
    """Integer answer in ``raw_text`` or None.

    Strict: the trimmed text must be one base-10 integer. Lenient: the first
    standalone integer token ("3." counts, "3.5" and "3rd" do not).
    """
    if raw_text is None:
        return None
    text = raw_text.strip()
    if strict:
        return int(text) if _STRICT.fullmatch(text) else None
    m = _TOKEN.search(text)
    return int(m.group()) if m else None


def _usable(responses: Iterable[ResponseRecord], count_failures: bool) -> list[ResponseRecord]:
    return [r for r in responses if r.error is None or count_failures]


def _check_orphans(responses: Iterable[ResponseRecord], gold: Mapping[str, QARecord]) -> None:
    orphans = [r.question_id for r in responses if r.question_id not in gold]
    if orphans:
        raise OrphanResponses(orphans)


def _credits(responses: Iterable[ResponseRecord], gold: Mapping[str, QARecord], strict: bool
             ) -> dict[str, float]:
    """question_id -> fraction of its runs answered correctly."""
    hits: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for r in responses:
        h = hits[r.question_id]
        h[0] += parse_answer(r.raw_text, strict) == gold[r.question_id].answer
        h[1] += 1
    return {q: c / n for q, (c, n) in hits.items()}


@dataclass
class ScoreReport:
    group: str
    prompt_style: PromptStyle
    accuracy: dict  # QuestionType -> 0..100, absent when n == 0
    n: dict  # QuestionType -> question count
    overall: float

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "prompt_style": self.prompt_style.value,
            "accuracy": {q.value: self.accuracy.get(q) for q in QuestionType},
            "n": {q.value: self.n.get(q, 0) for q in QuestionType},
            "overall": self.overall,
        }


def as_gold(gold: Iterable[QARecord] | Mapping[str, QARecord]) -> dict[str, QARecord]:
    if isinstance(gold, Mapping):
        return dict(gold)
    return {g.question_id: g for g in gold}


def score(responses: Iterable[ResponseRecord], gold, strict: bool = False,
          count_failures: bool = False) -> list[ScoreReport]:
    """Accuracy per (group, prompt style), sorted by that key.

    Repeated runs of a question are averaged into one credit first, so every
    question weighs the same regardless of its run count.
    """
    gold = as_gold(gold)
    responses = list(responses)
    _check_orphans(responses, gold)
    buckets: dict[tuple[str, PromptStyle], list[ResponseRecord]] = defaultdict(list)
    for r in _usable(responses, count_failures):
        buckets[(r.group, r.prompt_style)].append(r)

    reports = []
    for (group, style), rs in sorted(buckets.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        credits = _credits(rs, gold, strict)
        acc, n = {}, {}
        for qtype in QuestionType:
            vals = [c for q, c in credits.items() if gold[q].qtype is qtype]
            n[qtype] = len(vals)
            if vals:
                acc[qtype] = 100.0 * sum(vals) / len(vals)
        total = sum(n.values())
        overall = sum(acc[q] * n[q] for q in acc) / total if total else 0.0
        reports.append(ScoreReport(group, style, acc, n, overall))
    return reports


@dataclass
class StabilityReport:
    group: str
    n_questions: int
    unstable_questions: int
    mean_accuracy: float | None = None

    @property
    def stability_pct(self) -> float:
        return 100.0 * (self.n_questions - self.unstable_questions) / self.n_questions

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "n_questions": self.n_questions,
            "unstable_questions": self.unstable_questions,
            "stability_pct": self.stability_pct,
            "mean_accuracy": self.mean_accuracy,
        }


def stability(responses: Iterable[ResponseRecord], runs_expected: int = 29, gold=None,
              strict: bool = False, group: str | None = None) -> StabilityReport:
    """Share of questions answered identically in every run (no answer is itself an answer)."""
    responses = list(responses)
    groups = {r.group for r in responses}
    if group is None:
        if len(groups) != 1:
            raise HarnessError(f"stability needs responses from one group, got {sorted(groups)}")
        group = groups.pop()
    else:
        responses = [r for r in responses if r.group == group]
    if not responses:
        raise HarnessError(f"no responses for group {group!r}")

    answers: dict[str, list] = defaultdict(list)
    for r in responses:
        answers[r.question_id].append(parse_answer(r.raw_text, strict) if r.error is None else None)
    for q in sorted(answers):
        if len(answers[q]) != runs_expected:
            raise MissingRuns(q, len(answers[q]), runs_expected)
    unstable = sum(len(set(a)) > 1 for a in answers.values())

    mean_acc = None
    if gold is not None:
        gold = as_gold(gold)
        _check_orphans(responses, gold)
        credits = _credits(responses, gold, strict)
        mean_acc = 100.0 * sum(credits.values()) / len(credits)
    return StabilityReport(group, len(answers), unstable, mean_acc)


def per_table_solve_rate(responses: Iterable[ResponseRecord], gold, strict: bool = False
                         ) -> dict[str, float]:
    """table_id -> mean correctness over its (question, group) pairs."""
    gold = as_gold(gold)
    responses = list(responses)
    _check_orphans(responses, gold)
    by_group: dict[str, list[ResponseRecord]] = defaultdict(list)
    for r in _usable(responses, False):
        by_group[r.group].append(r)
    per_table: dict[str, list[float]] = defaultdict(list)
    for rs in by_group.values():
        for q, credit in _credits(rs, gold, strict).items():
            per_table[gold[q].table_id].append(credit)
    return {t: sum(v) / len(v) for t, v in sorted(per_table.items())}


def solve_rate_csv(rates: Mapping[str, float]) -> str:
    return "table_id,solve_rate\n" + "".join(f"{t},{v!r}\n" for t, v in sorted(rates.items()))


def sample_tuning_subset(records: Iterable[QARecord], n_per_type: int = 1250, seed: int = 0) -> list[str]:
    """Draw ``n_per_type`` questions per type, no two of a type from the same table.

    The draw depends only on the record set and the seed, not on input order.
    """
    by_type: dict[QuestionType, dict[str, list[str]]] = {q: defaultdict(list) for q in QuestionType}
    for r in records:
        by_type[r.qtype][r.table_id].append(r.question_id)
    rng = random.Random(seed)
    chosen = []
    for qtype in QuestionType:
        tables = sorted(by_type[qtype])
        if len(tables) < n_per_type:
            raise InsufficientTables(
                f"{qtype.value}: only {len(tables)} distinct tables available, asked for {n_per_type}")
        for t in rng.sample(tables, n_per_type):
            chosen.append(rng.choice(sorted(by_type[qtype][t])))
    return sorted(chosen)
