"""Complex-table predicate: multi-column spanning cells stacked into a hierarchy."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .geometry import DEFAULT_EPS, BBox, MalformedAnnotation, h_contains
from .ingest import Diagnostics, ElementKind, EnrichedTable, reading_order_boxes


@dataclass(frozen=True)
class FilterConfig:
    coverage_threshold: float = 0.90
    min_covered_columns: int = 2
    containment_eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not 0 < self.coverage_threshold <= 1:
            raise ValueError(f"coverage_threshold must be in (0, 1], got {self.coverage_threshold}")
        if self.min_covered_columns < 2:
            raise ValueError("min_covered_columns must be at least 2")
        if self.containment_eps < 0:
            raise ValueError("containment_eps must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HeaderCell:
    box: BBox
    text: str
    covered_columns: tuple[int, ...]


def _covered(fractions: np.ndarray, threshold: float) -> tuple[int, ...]:
    if np.isnan(fractions).any():
        raise MalformedAnnotation("zero-width column in coverage test")
    return tuple(int(i) for i in np.flatnonzero(fractions >= threshold))


def _flag_gaps(cols: tuple[int, ...], box: BBox, diagnostics: Diagnostics | None) -> None:
    if diagnostics is not None and cols and cols[-1] - cols[0] + 1 != len(cols):
        diagnostics.warnings.append(f"non-contiguous column coverage {list(cols)} for cell {list(box.as_tuple())}")


def covered_columns(cell: BBox, columns: Sequence[BBox], cfg: FilterConfig = FilterConfig(),
                    diagnostics: Diagnostics | None = None) -> tuple[int, ...]:
    """Indices of columns whose width the cell covers by at least the threshold.

    ``columns`` must be sorted by ``x_min``. Non-contiguous results are
    returned as-is and flagged in ``diagnostics``.
    """
    if not columns:
        return ()
    frac = _kernels.hcover_matrix(_kernels.as_array([cell]), _kernels.as_array(columns))[0]
    cols = _covered(frac, cfg.coverage_threshold)
    _flag_gaps(cols, cell, diagnostics)
    return cols


def sorted_columns(table: EnrichedTable) -> list[BBox]:
    boxes = [table.elements[i].box for i in table.of_kind(ElementKind.COLUMN)]
    return sorted(boxes, key=lambda b: (b.x_min, b.x_max, b.y_min, b.y_max))


def qualifying_spanners(table: EnrichedTable, cfg: FilterConfig = FilterConfig(),
                        diagnostics: Diagnostics | None = None) -> list[HeaderCell]:
    """Spanning cells that cover at least ``min_covered_columns`` columns, in reading order."""
    span_idx = table.of_kind(ElementKind.SPANNING_CELL)
    columns = sorted_columns(table)
    if not span_idx or not columns:
        return []
    boxes = [table.elements[i].box for i in span_idx]
    frac = _kernels.hcover_matrix(_kernels.as_array(boxes), _kernels.as_array(columns))
    cells = []
    for row, (i, box) in enumerate(zip(span_idx, boxes)):
        cols = _covered(frac[row], cfg.coverage_threshold)
        if len(cols) >= cfg.min_covered_columns:
            _flag_gaps(cols, box, diagnostics)
            cells.append(HeaderCell(box, table.element_text.get(i, ""), cols))
    return [cells[i] for i in reading_order_boxes([c.box for c in cells])]


def has_vertical_dependency(cells: Sequence[HeaderCell], eps: float = DEFAULT_EPS) -> bool:
    """True iff one cell sits below another and lies within its horizontal span."""
    for i, upper in enumerate(cells):
        for j, lower in enumerate(cells):
            if i != j and upper.box.y_max <= lower.box.y_min + eps and h_contains(upper.box, lower.box, eps):
                return True
    return False


def is_complex(table: EnrichedTable, cfg: FilterConfig = FilterConfig(),
               diagnostics: Diagnostics | None = None) -> bool:
    cells = qualifying_spanners(table, cfg, diagnostics)
    return len(cells) >= 2 and has_vertical_dependency(cells, cfg.containment_eps)
