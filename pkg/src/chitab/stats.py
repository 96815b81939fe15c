"""Benchmark summary statistics: split coverage, answer moments, questions per table."""

from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping

from .ingest import Split
from .qa import QARecord, QuestionType


@dataclass
class RunningStats:
    """Welford accumulator; ``merge`` combines partial results (Chan et al.)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def merge(self, other: RunningStats) -> RunningStats:
        if other.n == 0:
            return RunningStats(self.n, self.mean, self.m2)
        if self.n == 0:
            return RunningStats(other.n, other.mean, other.m2)
        n = self.n + other.n
        d = other.mean - self.mean
        return RunningStats(n, self.mean + d * other.n / n, self.m2 + other.m2 + d * d * self.n * other.n / n)

    @property
    def std(self) -> float:
        """Population standard deviation."""
        return math.sqrt(self.m2 / self.n) if self.n else float("nan")


@dataclass
class SplitStats:
    split: Split
    tables_in: int = 0
    tables_kept: int = 0
    questions: int = 0
    shqa_mean: float | None = None
    shqa_std: float | None = None
    vlqa_mean: float | None = None
    vlqa_std: float | None = None

    @property
    def coverage_pct(self) -> float:
        return 100.0 * self.tables_kept / self.tables_in if self.tables_in else 0.0

    def to_dict(self) -> dict:
        return {
            "split": self.split.value,
            "tables_in": self.tables_in,
            "tables_kept": self.tables_kept,
            "coverage_pct": self.coverage_pct,
            "questions": self.questions,
            "shqa_mean": self.shqa_mean,
            "shqa_std": self.shqa_std,
            "vlqa_mean": self.vlqa_mean,
            "vlqa_std": self.vlqa_std,
        }


def round_half_up(x: float, places: int = 2) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def coverage(run_log: Mapping[str, Mapping[str, int]]) -> list[SplitStats]:
    """Per-split counts from a filter log ``{split: {"tables_in": n, "tables_kept": k}}``."""
    out = {}
    for label, counts in run_log.items():
        split = Split.parse(label)
        s = out.setdefault(split, SplitStats(split))
        s.tables_in += int(counts["tables_in"])
        s.tables_kept += int(counts["tables_kept"])
        if s.tables_kept > s.tables_in:
            raise ValueError(f"{split.value}: kept {s.tables_kept} > in {s.tables_in}")
    return [out[s] for s in Split if s in out]


def answer_stats(records: Iterable[QARecord]) -> dict[Split, dict]:
    """Single pass over records -> ``{split: {"questions": n, SHQA: RunningStats, VLQA: RunningStats}}``.

    Splits absent from the stream are absent from the result.
    """
    acc: dict[Split, dict] = {}
    for r in records:
        slot = acc.setdefault(r.split, {"questions": 0, QuestionType.SHQA: RunningStats(),
                                        QuestionType.VLQA: RunningStats()})
        slot["questions"] += 1
        slot[r.qtype].push(r.answer)
    return acc


def combine(run_log: Mapping[str, Mapping[str, int]] | None, records: Iterable[QARecord]) -> list[SplitStats]:
    by_split = {s.split: s for s in coverage(run_log or {})}
    for split, slot in answer_stats(records).items():
        s = by_split.setdefault(split, SplitStats(split))
        s.questions = slot["questions"]
        sh, vl = slot[QuestionType.SHQA], slot[QuestionType.VLQA]
        if sh.n:
            s.shqa_mean, s.shqa_std = sh.mean, sh.std
        if vl.n:
            s.vlqa_mean, s.vlqa_std = vl.mean, vl.std
    return [by_split[s] for s in Split if s in by_split]


def questions_per_table_histogram(records: Iterable[QARecord]) -> dict[int, int]:
    per_table = Counter(r.table_id for r in records)
    return dict(sorted(Counter(per_table.values()).items()))


def histogram_csv(hist: Mapping[int, int]) -> str:
    buf = io.StringIO()
    buf.write("bucket,count\n")
    for bucket, count in sorted(hist.items()):
        buf.write(f"{bucket},{count}\n")
    return buf.getvalue()


def _fmt(mean, std) -> str:
    if mean is None:
        return "-"
    return f"{round_half_up(mean)}±{round_half_up(std)}"


def render_text(stats: list[SplitStats]) -> str:
    rows = [("Split", "Tables in", "Kept", "Coverage (%)", "SHQA", "VLQA", "# Questions")]
    for s in stats:
        rows.append((s.split.value, str(s.tables_in), str(s.tables_kept),
                     round_half_up(s.coverage_pct) if s.tables_in else "-",
                     _fmt(s.shqa_mean, s.shqa_std), _fmt(s.vlqa_mean, s.vlqa_std), str(s.questions)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    return "\n".join(lines) + "\n"
