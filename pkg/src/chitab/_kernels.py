"""Pairwise box kernels: numba when available, numpy otherwise.

Set ``CHITAB_NO_NUMBA=1`` to force the numpy path. Both paths return
identical results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("CHITAB_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by CHITAB_NO_NUMBA")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def intersect_matrix_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n, 4) x (m, 4) boxes -> (n, m) bool, positive-area overlap."""
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return (w > 0) & (h > 0)


def hcover_matrix_numpy(cells: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """(n, 4) cells x (m, 4) columns -> (n, m) covered fraction of each column's width.

    Zero-width columns yield NaN; callers turn that into an error.
    """
    inter = np.minimum(cells[:, None, 2], cols[None, :, 2]) - np.maximum(cells[:, None, 0], cols[None, :, 0])
    inter = np.maximum(inter, 0.0)
    width = cols[:, 2] - cols[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = inter / width[None, :]
    out[:, width <= 0] = np.nan
    return out


if HAS_NUMBA:
    @njit(cache=True)
    def intersect_matrix_numba(a, b):
        n = a.shape[0]
        m = b.shape[0]
        out = np.zeros((n, m), dtype=np.bool_)
        for i in range(n):
            for j in range(m):
                w = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
                if w <= 0:
                    continue
                h = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
                if h > 0:
                    out[i, j] = True
        return out

    @njit(cache=True)
    def hcover_matrix_numba(cells, cols):
        n = cells.shape[0]
        m = cols.shape[0]
        out = np.empty((n, m), dtype=np.float64)
        for j in range(m):
            width = cols[j, 2] - cols[j, 0]
            for i in range(n):
                if width <= 0:
                    out[i, j] = np.nan
                    continue
                inter = min(cells[i, 2], cols[j, 2]) - max(cells[i, 0], cols[j, 0])
                out[i, j] = inter / width if inter > 0 else 0.0
        return out

    intersect_matrix = intersect_matrix_numba
    hcover_matrix = hcover_matrix_numba
else:
    intersect_matrix = intersect_matrix_numpy
    hcover_matrix = hcover_matrix_numpy


def as_array(boxes) -> np.ndarray:
    """Stack BBox-like objects into a contiguous (n, 4) float64 array."""
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes], dtype=np.float64)


def warm_up() -> None:
    """Trigger compilation so worker processes inherit compiled kernels."""
    a = np.zeros((1, 4))
    intersect_matrix(a, a)
    hcover_matrix(a, np.array([[0.0, 0.0, 1.0, 1.0]]))
