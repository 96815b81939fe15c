"""Question generation: integer ground truth and prompt renderings per heading."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .geometry import BBox
from .hierarchy import HeaderForest, HeaderNode
from .ingest import EnrichedTable, Split


class CorruptForest(ValueError):
    pass


class QuestionType(str, Enum):
    SHQA = "SHQA"
    VLQA = "VLQA"

    @property
    def short(self) -> str:
        return "SH" if self is QuestionType.SHQA else "VL"


class PromptStyle(str, Enum):
    BASE = "Base"
    WITH_EXPLANATION = "WithExplanation"
    UPPERCASE = "Uppercase"
    POLITE = "Polite"
    GPT_SHORT = "GptShort"
    GPT_LONG = "GptLong"
    MOTIVATION = "Motivation"
    REWARD = "Reward"

    @classmethod
    def parse(cls, value: str | PromptStyle) -> PromptStyle:
        if isinstance(value, PromptStyle):
            return value
        key = "".join(ch for ch in str(value).lower() if ch.isalnum())
        for style in cls:
            if style.value.lower() == key:
                return style
        raise ValueError(f"unknown prompt style {value!r}")


# {h} marks the heading slot; it is filled after any case transform.
_QUESTION = {
    QuestionType.SHQA: "How many immediate sub-headings does the heading {h} have?",
    QuestionType.VLQA: "How many value-level columns fall under the heading {h}?",
}
_EXPLANATION = {
    QuestionType.SHQA: "An immediate sub-heading is one directly below the heading in reading order.",
    QuestionType.VLQA: "A value-level column is a leaf column of the table that holds data values.",
}
_GPT_SHORT = {
    QuestionType.SHQA: "What is the count of direct sub-headings under the heading {h}?",
    QuestionType.VLQA: "What is the count of value-level columns under the heading {h}?",
}
_GPT_LONG = {
    QuestionType.SHQA: ("Considering the hierarchical structure of the table, determine how many "
                        "immediate child headings are associated with {h}."),
    QuestionType.VLQA: ("Considering the hierarchical structure of the table, determine how many "
                        "value-level columns are associated with {h}."),
}
_POLITE = ("Would you be so kind as to let me know ", " Thank you so much for your time!")
_MOTIVATION = "I know this is a very hard task but you can do it! Don't give up now! "
_REWARD = "I will give you 1000 euros if you help me with this task. "


def _template(style: PromptStyle, qtype: QuestionType) -> str:
    q = _QUESTION[qtype]
    if style is PromptStyle.BASE:
        return q
    if style is PromptStyle.WITH_EXPLANATION:
        return f"{q} {_EXPLANATION[qtype]}"
    if style is PromptStyle.UPPERCASE:
        return q.upper().replace("{H}", "{h}")
    if style is PromptStyle.POLITE:
        return _POLITE[0] + q[0].lower() + q[1:] + _POLITE[1]
    if style is PromptStyle.GPT_SHORT:
        return _GPT_SHORT[qtype]
    if style is PromptStyle.GPT_LONG:
        return _GPT_LONG[qtype]
    if style is PromptStyle.MOTIVATION:
        return _MOTIVATION + q
    return _REWARD + q


def render_prompt(style: PromptStyle, qtype: QuestionType, heading_text: str) -> str:
    if not heading_text.strip():
        raise ValueError("heading text must be non-empty")
    return _template(PromptStyle.parse(style), QuestionType(qtype)).replace("{h}", f"'{heading_text}'", 1)


def vlqa_answer(h: HeaderNode) -> int:
    return len(h.value_columns)


def shqa_answer(h: HeaderNode, forest: HeaderForest, table_id: str = "") -> int:
    """Direct sub-headings of ``h``: value columns + children - columns owned by children."""
    children = [forest.nodes[c] for c in h.children]
    answer = len(h.value_columns) + len(children) - sum(len(c.value_columns) for c in children)
    if answer < 0:
        raise CorruptForest(f"negative sub-heading count {answer} in table {table_id!r}")
    return answer


@dataclass(frozen=True)
class QARecord:
    question_id: str
    table_id: str
    split: Split
    image_name: str
    heading_text: str
    heading_bbox: BBox
    qtype: QuestionType
    answer: int
    prompts: dict

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "table_id": self.table_id,
            "split": self.split.value,
            "image_name": self.image_name,
            "heading_text": self.heading_text,
            "heading_bbox": list(self.heading_bbox.as_tuple()),
            "qtype": self.qtype.value,
            "answer": self.answer,
            "prompts": {s.value: self.prompts[s] for s in PromptStyle},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> QARecord:
        return cls(
            question_id=d["question_id"],
            table_id=d["table_id"],
            split=Split.parse(d["split"]),
            image_name=d["image_name"],
            heading_text=d["heading_text"],
            heading_bbox=BBox(*d["heading_bbox"]),
            qtype=QuestionType(d["qtype"]),
            answer=int(d["answer"]),
            prompts={PromptStyle(k): v for k, v in d.get("prompts", {}).items()},
        )


def question_id(table_id: str, node_idx: int, qtype: QuestionType) -> str:
    return f"{table_id}#n{node_idx}#{qtype.short}"


def generate_records(table: EnrichedTable, forest: HeaderForest,
                     warnings: list | None = None) -> list[QARecord]:
    """One SHQA and one VLQA record per forest node, in node order.

    Nodes without any text cannot be named in a prompt and are skipped;
    each skip is noted in ``warnings`` when given.
    """
    out = []
    for i, node in enumerate(forest.nodes):
        if not node.text.strip():
            if warnings is not None:
                warnings.append(f"node {i} has no text; no questions generated")
            continue
        answers = {QuestionType.SHQA: shqa_answer(node, forest, table.table_id),
                   QuestionType.VLQA: vlqa_answer(node)}
        for qtype in (QuestionType.SHQA, QuestionType.VLQA):
            out.append(QARecord(
                question_id=question_id(table.table_id, i, qtype),
                table_id=table.table_id,
                split=table.split,
                image_name=table.image_name,
                heading_text=node.text,
                heading_bbox=node.box,
                qtype=qtype,
                answer=answers[qtype],
                prompts={s: render_prompt(s, qtype, node.text) for s in PromptStyle},
            ))
    return out


def read_records(path) -> list[QARecord]:
    with open(path, encoding="utf-8") as f:
        return [QARecord.from_dict(json.loads(line)) for line in f if line.strip()]
