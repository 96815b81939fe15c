"""Random tables with known header forests, for tests, benchmarks and fixtures.

Header cells sit on a column grid. Each cell edge is perturbed by uniform
noise of half the ``jitter`` amplitude, so two boxes meant to share an edge
disagree by at most ``jitter`` pixels.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import BBox
from .ingest import (ElementKind, EnrichedTable, Split, StructElement, Word, enrich,
                     serialize_structure, serialize_words)


@dataclass
class SyntheticTable:
    table: EnrichedTable
    parent: dict[str, str | None]  # header label -> parent label
    value_columns: dict[str, tuple[int, ...]]
    elements: list[StructElement] = field(repr=False, default_factory=list)
    words: list[Word] = field(repr=False, default_factory=list)

    @property
    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {k: [] for k in self.parent}
        for k, p in self.parent.items():
            if p is not None:
                out[p].append(k)
        return out


def _segments(rng: random.Random, lo: int, hi: int) -> list[tuple[int, int]]:
    cuts = sorted(rng.sample(range(lo + 1, hi), rng.randint(0, min(3, hi - lo - 1))))
    bounds = [lo, *cuts, hi]
    return list(zip(bounds[:-1], bounds[1:]))


def random_forest(rng: random.Random, n_cols: int, max_depth: int = 4):
    """Return ``[(label, lo, hi, level, parent_label)]`` over columns ``[0, n_cols)``."""
    nodes = []

    def grow(lo, hi, level, parent):
        label = f"H{len(nodes)}"
        nodes.append((label, lo, hi, level, parent))
        if level + 1 >= max_depth or hi - lo < 3 or rng.random() < 0.25:
            return
        segs = _segments(rng, lo, hi)
        if len(segs) == 1:
            return
        for a, b in segs:
            if b - a >= 2 and rng.random() < 0.75:
                grow(a, b, level + 1, label)

    for a, b in _segments(rng, 0, n_cols) if n_cols > 2 else [(0, n_cols)]:
        if b - a >= 2 and rng.random() < 0.85:
            grow(a, b, rng.choice((0, 0, 0, 1)) if max_depth > 1 else 0, None)
    if not nodes:
        grow(0, n_cols, 0, None)
    return nodes


def random_table(rng: random.Random, table_id: str = "synth", split: Split | str = Split.TRAIN,
                 n_cols: int | None = None, max_depth: int = 4, jitter: float = 0.3,
                 body_rows: int | None = None, distractors: bool = True) -> SyntheticTable:
    n_cols = n_cols or rng.randint(2, 12)
    nodes = random_forest(rng, n_cols, max_depth)
    n_levels = max(n[3] for n in nodes) + 1

    def j():
        return rng.uniform(-jitter / 2, jitter / 2)

    x0, y0 = rng.uniform(5, 60), rng.uniform(5, 60)
    xs = [x0]
    for _ in range(n_cols):
        xs.append(xs[-1] + rng.uniform(30, 120))
    row_h = rng.uniform(14, 24)
    gap = rng.uniform(0, 0.3 * row_h)
    level_top = [y0 + k * (row_h + gap) for k in range(n_levels + 1)]  # last = leaf header row
    body_rows = body_rows if body_rows is not None else rng.randint(2, 6)
    body_top = level_top[-1] + row_h + gap
    row_tops = level_top + [body_top + k * row_h for k in range(body_rows)]
    y_end = row_tops[-1] + row_h

    elements = [StructElement(ElementKind.TABLE, BBox(xs[0], y0, xs[-1], y_end))]
    for t in row_tops:
        elements.append(StructElement(ElementKind.ROW, BBox(xs[0] + j(), t + j(), xs[-1] + j(), t + row_h + j())))
    for c in range(n_cols):
        elements.append(StructElement(ElementKind.COLUMN, BBox(xs[c] + j(), y0 + j(), xs[c + 1] + j(), y_end + j())))
    elements.append(StructElement(ElementKind.COLUMN_HEADER,
                                  BBox(xs[0], y0, xs[-1], level_top[-1] + row_h)))

    words = []
    for label, lo, hi, lvl, _ in nodes:
        top = level_top[lvl]
        box = BBox(xs[lo] + j(), top + j(), xs[hi] + j(), top + row_h + j())
        elements.append(StructElement(ElementKind.SPANNING_CELL, box))
        mid = 0.5 * (box.x_min + box.x_max)
        words.append(Word(label, BBox(mid - 8, top + 3, mid + 8, top + row_h - 3)))
    for c in range(n_cols):
        for k, t in enumerate(row_tops[n_levels:]):
            text = f"c{c}" if k == 0 else f"v{c}.{k}"
            words.append(Word(text, BBox(xs[c] + 3, t + 3, xs[c] + 20, t + row_h - 3)))
    if distractors and body_rows >= 2 and rng.random() < 0.5:
        c = rng.randrange(n_cols)
        t = row_tops[n_levels + 1]
        elements.append(StructElement(ElementKind.SPANNING_CELL, BBox(xs[c], t, xs[c + 1], t + 2 * row_h)))

    order = list(range(len(elements)))
    rng.shuffle(order)
    elements = [elements[i] for i in order]
    rng.shuffle(words)
    table = enrich(table_id, split, f"{table_id}.jpg", elements, words)
    return SyntheticTable(
        table=table,
        parent={lab: p for lab, _, _, _, p in nodes},
        value_columns={lab: tuple(range(lo, hi)) for lab, lo, hi, _, _ in nodes},
        elements=elements,
        words=words,
    )


def flat_table(rng: random.Random, table_id: str, split: Split | str = Split.TRAIN) -> SyntheticTable:
    """A table with a single header row and no spanning cells."""
    n_cols = rng.randint(2, 8)
    xs = [10.0]
    for _ in range(n_cols):
        xs.append(xs[-1] + rng.uniform(30, 90))
    h = 16.0
    elements = [StructElement(ElementKind.TABLE, BBox(xs[0], 10, xs[-1], 10 + 4 * h))]
    elements += [StructElement(ElementKind.ROW, BBox(xs[0], 10 + k * h, xs[-1], 10 + (k + 1) * h)) for k in range(4)]
    elements += [StructElement(ElementKind.COLUMN, BBox(xs[c], 10, xs[c + 1], 10 + 4 * h)) for c in range(n_cols)]
    words = [Word(f"r{k}c{c}", BBox(xs[c] + 2, 12 + k * h, xs[c] + 20, 8 + (k + 1) * h))
             for k in range(4) for c in range(n_cols)]
    table = enrich(table_id, split, f"{table_id}.jpg", elements, words)
    return SyntheticTable(table, {}, {}, elements, words)


def corrupt_bytes(rng: random.Random, xml: bytes, words: bytes) -> tuple[bytes | None, bytes | None]:
    """Damage one annotation pair in one of several ways; ``None`` means delete the file."""
    kind = rng.randrange(5)
    if kind == 0:
        return xml[: len(xml) // 2], words
    if kind == 1:
        return xml, words[: len(words) // 2]
    if kind == 2:
        return xml, None
    if kind == 3:
        return b"<annotation><object><name>table row</name></annotation>", words
    # no columns survive: every column label is renamed
    return xml.replace(b"table column<", b"table colunm<"), words


def write_corpus(root, n_tables: int, seed: int = 0, corrupt_fraction: float = 0.0,
                 flat_fraction: float = 0.5) -> dict:
    """Write a PubTables-style corpus: ``root/structure/<split>/*.xml`` and ``root/words/*_words.json``.

    Returns ``{"corrupted": [ids], "spanned": [ids], "flat": [ids]}``; spanned
    tables carry spanning headers but need not pass the complexity filter.
    """
    rng = random.Random(seed)
    root = Path(root)
    splits = [Split.TRAIN] * 8 + [Split.VALID, Split.TEST]
    dirname = {Split.TRAIN: "train", Split.VALID: "val", Split.TEST: "test"}
    (root / "words").mkdir(parents=True, exist_ok=True)
    n_corrupt = round(n_tables * corrupt_fraction)
    corrupt_ids = set(rng.sample(range(n_tables), n_corrupt))
    info = {"corrupted": [], "spanned": [], "flat": []}
    for k in range(n_tables):
        split = splits[k % len(splits)]
        tid = f"PMC{100000 + k}_table_{k % 3}"
        if rng.random() < flat_fraction:
            st = flat_table(rng, tid, split)
            info["flat"].append(tid)
        else:
            st = random_table(rng, tid, split)
            info["spanned"].append(tid)
        xml = serialize_structure(st.table.image_name, st.elements)
        wjs = serialize_words(st.words)
        if k in corrupt_ids:
            xml, wjs = corrupt_bytes(rng, xml, wjs)
            info["corrupted"].append(tid)
        sdir = root / "structure" / dirname[split]
        sdir.mkdir(parents=True, exist_ok=True)
        if xml is not None:
            (sdir / f"{tid}.xml").write_bytes(xml)
        if wjs is not None:
            (root / "words" / f"{tid}_words.json").write_bytes(wjs)
    return info
