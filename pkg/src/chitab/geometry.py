"""Axis-aligned boxes and horizontal intervals in image-pixel coordinates.

y grows downward, so a smaller ``y_min`` means higher on the page.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_EPS = 0.5


class MalformedAnnotation(ValueError):
    """Raised when an annotation box cannot support a geometric rule."""


@dataclass(frozen=True, slots=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise MalformedAnnotation(f"non-finite coordinate in {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise MalformedAnnotation(f"inverted box {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def y_center(self) -> float:
        return 0.5 * (self.y_min + self.y_max)

    @property
    def hspan(self) -> HInterval:
        return HInterval(self.x_min, self.x_max)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def translated(self, dx: float = 0.0, dy: float = 0.0) -> BBox:
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scaled(self, s: float) -> BBox:
        return BBox(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)


@dataclass(frozen=True, slots=True)
class HInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise MalformedAnnotation(f"inverted interval ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def overlap(self, other: HInterval) -> float:
        """Length of the intersection, 0 when disjoint."""
        return max(0.0, min(self.hi, other.hi) - max(self.lo, other.lo))


def intersects(a: BBox, b: BBox) -> bool:
    """True iff the rectangles share positive area; touching edges do not count."""
    return (min(a.x_max, b.x_max) - max(a.x_min, b.x_min) > 0
            and min(a.y_max, b.y_max) - max(a.y_min, b.y_min) > 0)


def h_overlap_fraction(cell: BBox, column: BBox) -> float:
    """Fraction of the column's width covered by the cell's x-projection."""
    width = column.width
    if width <= 0:
        raise MalformedAnnotation(f"zero-width column {column.as_tuple()}")
    return cell.hspan.overlap(column.hspan) / width


def h_contains(outer: BBox, inner: BBox, eps: float = DEFAULT_EPS) -> bool:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return outer.x_min - eps <= inner.x_min and inner.x_max <= outer.x_max + eps
