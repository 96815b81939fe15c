"""Parse structure/word annotations and attach word text to structural elements."""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .geometry import BBox, MalformedAnnotation


class AnnotationParseError(ValueError):
    """Malformed annotation document; ``offset`` is the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class ElementKind(str, Enum):
    ROW = "Row"
    COLUMN = "Column"
    COLUMN_HEADER = "ColumnHeader"
    PROJECTED_ROW_HEADER = "ProjectedRowHeader"
    SPANNING_CELL = "SpanningCell"
    TABLE = "Table"


LABELS = {
    "table": ElementKind.TABLE,
    "table row": ElementKind.ROW,
    "table column": ElementKind.COLUMN,
    "table column header": ElementKind.COLUMN_HEADER,
    "table projected row header": ElementKind.PROJECTED_ROW_HEADER,
    "table spanning cell": ElementKind.SPANNING_CELL,
}
KIND_TO_LABEL = {v: k for k, v in LABELS.items()}


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"

    @classmethod
    def parse(cls, value: str | Split) -> Split:
        if isinstance(value, Split):
            return value
        key = str(value).strip().lower()
        aliases = {"train": cls.TRAIN, "val": cls.VALID, "valid": cls.VALID,
                   "validation": cls.VALID, "test": cls.TEST}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown split label {value!r}") from None


@dataclass(frozen=True, slots=True)
class Word:
    text: str
    box: BBox


@dataclass(frozen=True, slots=True)
class StructElement:
    kind: ElementKind
    box: BBox


@dataclass
class Diagnostics:
    """Per-file problems. Never fatal on its own; emitted as a sidecar record."""

    source: str = ""
    skipped_labels: Counter = field(default_factory=Counter)
    rejected_elements: list = field(default_factory=list)
    rejected_words: list = field(default_factory=list)
    empty_words: int = 0
    orphan_words: int = 0
    warnings: list = field(default_factory=list)
    error: str | None = None

    def is_empty(self) -> bool:
        return not (self.skipped_labels or self.rejected_elements or self.rejected_words
                    or self.empty_words or self.orphan_words or self.warnings or self.error)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "error": self.error,
            "skipped_labels": dict(sorted(self.skipped_labels.items())),
            "rejected_elements": self.rejected_elements,
            "rejected_words": self.rejected_words,
            "empty_words": self.empty_words,
            "orphan_words": self.orphan_words,
            "warnings": self.warnings,
        }


@dataclass
class EnrichedTable:
    table_id: str
    split: Split
    image_name: str
    elements: list[StructElement]
    element_text: dict[int, str]
    words: list[Word]

    def __post_init__(self):
        kinds = {e.kind for e in self.elements}
        if ElementKind.ROW not in kinds or ElementKind.COLUMN not in kinds:
            raise MalformedAnnotation(f"table {self.table_id} lacks a row or a column")
        for k in self.element_text:
            if not 0 <= k < len(self.elements):
                raise MalformedAnnotation(f"element_text key {k} out of range")

    def of_kind(self, kind: ElementKind) -> list[int]:
        return [i for i, e in enumerate(self.elements) if e.kind is kind]

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "split": self.split.value,
            "image_name": self.image_name,
            "elements": [{"kind": e.kind.value, "bbox": list(e.box.as_tuple())} for e in self.elements],
            "element_text": {str(k): v for k, v in sorted(self.element_text.items())},
            "words": [{"text": w.text, "bbox": list(w.box.as_tuple())} for w in self.words],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EnrichedTable:
        return cls(
            table_id=d["table_id"],
            split=Split.parse(d["split"]),
            image_name=d["image_name"],
            elements=[StructElement(ElementKind(e["kind"]), BBox(*e["bbox"])) for e in d["elements"]],
            element_text={int(k): v for k, v in d["element_text"].items()},
            words=[Word(w["text"], BBox(*w["bbox"])) for w in d["words"]],
        )


def _byte_offset(document: bytes, line: int, column: int) -> int:
    lines = document.split(b"\n")
    return sum(len(x) + 1 for x in lines[: max(line - 1, 0)]) + column


def _parse_xml(document: bytes) -> ET.Element:
    try:
        return ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise AnnotationParseError(f"malformed structure XML: {exc}", _byte_offset(document, line, col)) from None


def parse_structure_document(document: bytes, diagnostics: Diagnostics | None = None
                             ) -> tuple[str, list[StructElement]]:
    """Return ``(image filename, elements)`` from a VOC-style structure file."""
    diag = diagnostics if diagnostics is not None else Diagnostics()
    root = _parse_xml(document)
    image_name = (root.findtext("filename") or "").strip()
    elements = []
    for n, obj in enumerate(root.iter("object")):
        label = (obj.findtext("name") or "").strip()
        kind = LABELS.get(label)
        if kind is None:
            diag.skipped_labels[label] += 1
            continue
        bnd = obj.find("bndbox")
        try:
            coords = [float(bnd.findtext(t)) for t in ("xmin", "ymin", "xmax", "ymax")]
            box = BBox(*coords)
        except (AttributeError, TypeError, ValueError) as exc:
            diag.rejected_elements.append({"object": n, "label": label, "reason": str(exc)})
            continue
        elements.append(StructElement(kind, box))
    return image_name, elements


def parse_structure(document: bytes, diagnostics: Diagnostics | None = None) -> list[StructElement]:
    return parse_structure_document(document, diagnostics)[1]


def parse_words(document: bytes, diagnostics: Diagnostics | None = None) -> list[Word]:
    diag = diagnostics if diagnostics is not None else Diagnostics()
    try:
        entries = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AnnotationParseError(f"malformed words JSON: {exc}", getattr(exc, "pos", None)) from None
    if not isinstance(entries, list):
        raise AnnotationParseError("words document is not a JSON array", 0)
    words = []
    for n, entry in enumerate(entries):
        try:
            text = entry["text"]
            x1, y1, x2, y2 = (float(v) for v in entry["bbox"])
            if not isinstance(text, str):
                raise TypeError("text is not a string")
        except (KeyError, TypeError, ValueError) as exc:
            diag.rejected_words.append({"index": n, "reason": f"bad entry: {exc}"})
            continue
        if not all(map(math.isfinite, (x1, y1, x2, y2))):
            diag.rejected_words.append({"index": n, "reason": "non-finite coordinate"})
            continue
        text = text.strip()
        if not text:
            diag.empty_words += 1
            continue
        try:
            words.append(Word(text, BBox(x1, y1, x2, y2)))
        except MalformedAnnotation as exc:
            diag.rejected_words.append({"index": n, "reason": str(exc)})
    return words


def reading_order_boxes(boxes: Sequence[BBox]) -> list[int]:
    """Indices of ``boxes`` in top-to-bottom, left-to-right order.

    Boxes share a line when their vertical centres differ by less than half
    the smaller height; each line is anchored on its first (highest-centre)
    member. Lines are ordered by top edge, members by left edge.
    """
    if not boxes:
        return []
    order = sorted(range(len(boxes)), key=lambda i: (boxes[i].y_center, boxes[i].x_min, boxes[i].as_tuple(), i))
    lines: list[list[int]] = []
    anchor = None
    for i in order:
        b = boxes[i]
        if anchor is not None and abs(b.y_center - anchor.y_center) < 0.5 * min(b.height, anchor.height):
            lines[-1].append(i)
        else:
            lines.append([i])
            anchor = b
    lines.sort(key=lambda ln: min(boxes[i].y_min for i in ln))
    out = []
    for ln in lines:
        ln.sort(key=lambda i: (boxes[i].x_min, boxes[i].as_tuple(), i))
        out.extend(ln)
    return out


def reading_order(words: Sequence[Word]) -> list[int]:
    return reading_order_boxes([w.box for w in words])


def assign_words(elements: Sequence[StructElement], words: Sequence[Word],
                 diagnostics: Diagnostics | None = None) -> dict[int, list[int]]:
    """Map each element index to the indices of words it intersects, in reading order."""
    hits = _kernels.intersect_matrix(_kernels.as_array([e.box for e in elements]),
                                     _kernels.as_array([w.box for w in words]))
    rank = np.empty(len(words), dtype=np.int64)
    rank[reading_order(words)] = np.arange(len(words))
    out = {}
    for i in range(len(elements)):
        idx = np.flatnonzero(hits[i])
        out[i] = idx[np.argsort(rank[idx], kind="stable")].tolist()
    if diagnostics is not None and len(words):
        diagnostics.orphan_words += int((~hits.any(axis=0)).sum())
    return out


def enrich(table_id: str, split: Split | str, image_name: str, elements: list[StructElement],
           words: list[Word], diagnostics: Diagnostics | None = None) -> EnrichedTable:
    assignment = assign_words(elements, words, diagnostics)
    text = {i: " ".join(words[j].text for j in idx) for i, idx in assignment.items() if idx}
    return EnrichedTable(table_id, Split.parse(split), image_name, elements, text, words)


def load_table(structure: bytes, words: bytes, table_id: str, split: Split | str,
               diagnostics: Diagnostics | None = None) -> EnrichedTable:
    """Parse one structure/words pair into an EnrichedTable.

    Raises AnnotationParseError or MalformedAnnotation when the pair is unusable.
    """
    diag = diagnostics if diagnostics is not None else Diagnostics(source=table_id)
    image_name, elements = parse_structure_document(structure, diag)
    word_list = parse_words(words, diag)
    return enrich(table_id, split, image_name, elements, word_list, diag)


def serialize_structure(image_name: str, elements: Sequence[StructElement]) -> bytes:
    """Write elements back out as a VOC-style document (used by fixtures and round trips)."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = image_name
    for e in elements:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = KIND_TO_LABEL[e.kind]
        bnd = ET.SubElement(obj, "bndbox")
        for tag, v in zip(("xmin", "ymin", "xmax", "ymax"), e.box.as_tuple()):
            ET.SubElement(bnd, tag).text = repr(float(v))
    return ET.tostring(root, encoding="utf-8")


def serialize_words(words: Sequence[Word]) -> bytes:
    return json.dumps([{"bbox": list(w.box.as_tuple()), "text": w.text} for w in words]).encode("utf-8")
