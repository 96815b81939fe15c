"""Header forest reconstruction from qualifying spanning cells."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .complexity import FilterConfig, HeaderCell, covered_columns
from .geometry import DEFAULT_EPS, BBox, h_contains
from .ingest import reading_order_boxes


class ForestError(RuntimeError):
    pass


@dataclass
class HeaderNode:
    cell: HeaderCell
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    value_columns: tuple[int, ...] = ()

    @property
    def text(self) -> str:
        return self.cell.text

    @property
    def box(self) -> BBox:
        return self.cell.box


@dataclass
class HeaderForest:
    """Nodes in reading order; ``parent``/``children``/``roots`` hold node indices."""

    nodes: list[HeaderNode]
    roots: list[int]
    warnings: list[str] = field(default_factory=list)

    def edges(self) -> list[tuple[int, int]]:
        return [(n.parent, i) for i, n in enumerate(self.nodes) if n.parent is not None]

    def depth(self, i: int) -> int:
        d = 1
        while self.nodes[i].parent is not None:
            i = self.nodes[i].parent
            d += 1
        return d

    def to_dict(self, table_id: str) -> dict:
        return {
            "table_id": table_id,
            "nodes": [
                {
                    "id": i,
                    "text": n.text,
                    "bbox": list(n.box.as_tuple()),
                    "parent_id": n.parent,
                    "children": list(n.children),
                    "value_columns": list(n.value_columns),
                }
                for i, n in enumerate(self.nodes)
            ],
        }


def sort_reading_order(cells: Sequence[HeaderCell]) -> list[HeaderCell]:
    return [cells[i] for i in reading_order_boxes([c.box for c in cells])]


def _is_parent(cand: BBox, child: BBox, eps: float) -> bool:
    gap = max(0.0, child.y_min - cand.y_max)
    return (cand.y_max <= child.y_min + eps
            and h_contains(cand, child, eps)
            and cand.width > child.width
            and gap < 0.5 * child.height)


def _parent_index(child: HeaderCell, candidates: Sequence[HeaderCell], eps: float) -> int | None:
    best = None
    best_key = None
    for k, cand in enumerate(candidates):
        if not _is_parent(cand.box, child.box, eps):
            continue
        # nearest above, then narrowest, then earliest in reading order
        key = (-cand.box.y_max, cand.box.width, k)
        if best_key is None or key < best_key:
            best, best_key = k, key
    return best


def find_parent(child: HeaderCell, candidates: Sequence[HeaderCell],
                eps: float = DEFAULT_EPS) -> HeaderCell | None:
    k = _parent_index(child, candidates, eps)
    return None if k is None else candidates[k]


def build_forest(cells: Sequence[HeaderCell], columns: Sequence[BBox],
                 cfg: FilterConfig = FilterConfig()) -> HeaderForest:
    ordered = sort_reading_order(cells)
    eps = cfg.containment_eps
    nodes = [HeaderNode(c, value_columns=covered_columns(c.box, columns, cfg)) for c in ordered]
    roots = []
    for i, node in enumerate(nodes):
        p = _parent_index(node.cell, ordered[:i], eps)
        node.parent = p
        if p is None:
            roots.append(i)
        else:
            nodes[p].children.append(i)
    for n in nodes:
        n.children.sort(key=lambda c: (nodes[c].box.x_min, c))

    forest = HeaderForest(nodes, roots)
    _check(forest)
    return forest


def _check(forest: HeaderForest) -> None:
    nodes = forest.nodes
    seen = set()
    stack = list(forest.roots)
    while stack:
        i = stack.pop()
        if i in seen:
            raise ForestError(f"node {i} reached twice")
        seen.add(i)
        stack.extend(nodes[i].children)
    if len(seen) != len(nodes):
        raise ForestError("cycle detected in header forest")

    for i, n in enumerate(nodes):
        parent_cols = set(n.value_columns)
        claimed: set[int] = set()
        for c in n.children:
            cols = set(nodes[c].value_columns)
            if not cols <= parent_cols:
                forest.warnings.append(f"child {c} columns {sorted(cols)} escape parent {i} {sorted(parent_cols)}")
            if cols & claimed:
                forest.warnings.append(f"siblings under {i} share columns {sorted(cols & claimed)}")
            claimed |= cols
