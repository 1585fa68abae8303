"""Rectangular map partition and the cell <-> map-coordinate bijection.

Cells are indexed row-major, ``i = row * cols + col``, with row 0 at
``min_y`` and column 0 at ``min_x``.  A cell is represented by its center
for every distance and geometry computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    min_x: float
    min_y: float
    cell_size: float
    rows: int
    cols: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if int(self.rows) != self.rows or self.rows < 1:
            raise ValueError(f"rows must be a positive integer, got {self.rows}")
        if int(self.cols) != self.cols or self.cols < 1:
            raise ValueError(f"cols must be a positive integer, got {self.cols}")

    @property
    def m(self) -> int:
        return self.rows * self.cols

    @property
    def max_x(self) -> float:
        return self.min_x + self.cols * self.cell_size

    @property
    def max_y(self) -> float:
        return self.min_y + self.rows * self.cell_size

    def check_index(self, i) -> int:
        i = int(i)
        if not 0 <= i < self.m:
            raise IndexError(f"cell index {i} outside [0, {self.m})")
        return i

    def row_col(self, i) -> tuple[int, int]:
        i = self.check_index(i)
        return divmod(i, self.cols)

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"(row={row}, col={col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def centers(self, cells=None) -> np.ndarray:
        """Centers of ``cells`` (all cells when None) as an ``(n, 2)`` array."""
        if cells is None:
            idx = np.arange(self.m)
        else:
            idx = np.asarray(cells, dtype=np.int64).reshape(-1)
            if idx.size and (idx.min() < 0 or idx.max() >= self.m):
                raise IndexError(f"cell index outside [0, {self.m})")
        rows, cols = np.divmod(idx, self.cols)
        out = np.empty((idx.size, 2))
        out[:, 0] = self.min_x + (cols + 0.5) * self.cell_size
        out[:, 1] = self.min_y + (rows + 0.5) * self.cell_size
        return out


def cell_center(i, g: GridConfig) -> tuple[float, float]:
    row, col = g.row_col(i)
    return (g.min_x + (col + 0.5) * g.cell_size, g.min_y + (row + 0.5) * g.cell_size)


def coord_to_cell(p, g: GridConfig) -> int | None:
    """Cell containing map point ``p``, or None when ``p`` is off the grid.

    Cells are half-open ``[lo, hi)`` on both axes; points on the far edge of
    the map belong to the last row/column.
    """
    x, y = float(p[0]), float(p[1])
    if not (g.min_x <= x <= g.max_x and g.min_y <= y <= g.max_y):
        return None
    col = min(int(math.floor((x - g.min_x) / g.cell_size)), g.cols - 1)
    row = min(int(math.floor((y - g.min_y) / g.cell_size)), g.rows - 1)
    return row * g.cols + col


def coords_to_cells(points, g: GridConfig) -> np.ndarray:
    """Vectorized :func:`coord_to_cell`; off-grid points map to -1."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    inside = (x >= g.min_x) & (x <= g.max_x) & (y >= g.min_y) & (y <= g.max_y)
    col = np.minimum(np.floor((x - g.min_x) / g.cell_size), g.cols - 1)
    row = np.minimum(np.floor((y - g.min_y) / g.cell_size), g.rows - 1)
    out = np.where(inside, row * g.cols + col, -1)
    return out.astype(np.int64)


def cell_distance(a, b, g: GridConfig) -> float:
    ax, ay = cell_center(a, g)
    bx, by = cell_center(b, g)
    return math.hypot(ax - bx, ay - by)
