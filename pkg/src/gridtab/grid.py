"""Core data model: logical tables and the padded vertex/edge lattice.

Conventions used everywhere in this package:

* Lattice arrays are indexed ``(i, j)`` where ``i`` is the row-line index
  (top to bottom) and ``j`` the column-line index (left to right), shape
  ``(m, n)``.
* ``down_edge[i, j]`` is the vertical unit edge from vertex ``(i, j)`` to
  vertex ``(i + 1, j)``; the last row ``i = m - 1`` has no downward edge
  and is fixed to False.
* ``right_edge[i, j]`` is the horizontal unit edge from vertex ``(i, j)``
  to vertex ``(i, j + 1)``; the last column ``j = n - 1`` is fixed to
  False.
* Vertex coordinates are normalized by image width/height to ``[0, 1]``;
  the sentinel ``-1`` marks lattice slots with no defined position
  (padding outside the table extent).
* Cell span indices are 0-based inclusive; HTML rowspan/colspan equals
  ``end - start + 1``.

A cell's ``quad`` is a ``(4, 2)`` float array of pixel corners, clockwise
from the top-left. In image coordinates (y down) a clockwise quad has
positive shoelace area.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "GridDims",
    "Cell",
    "LogicalTable",
    "GridLabel",
    "GridPrediction",
    "ValidationReport",
    "validate_logical_table",
    "incident_positive_edges",
    "grid_stats",
    "quad_signed_area",
    "COORD_SENTINEL",
]

COORD_SENTINEL = -1.0


def quad_signed_area(quad: np.ndarray) -> float:
    """Shoelace area of a 4-point polygon; positive for clockwise in y-down coords."""
    q = np.asarray(quad, dtype=float)
    x, y = q[:, 0], q[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class GridDims:
    """Size of the padded lattice: m row lines by n column lines."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError(f"lattice needs at least 2x2 lines, got {self.m}x{self.n}")

    def fits(self, rows: int, cols: int) -> bool:
        """True if a table with `rows` x `cols` cells fits this lattice."""
        return self.m >= rows + 1 and self.n >= cols + 1


@dataclass(frozen=True)
class Cell:
    """One table cell: inclusive span indices plus optional geometry/content."""

    row_start: int
    row_end: int
    col_start: int
    col_end: int
    quad: Optional[np.ndarray] = None
    content: Optional[str] = None

    def __post_init__(self):
        if self.quad is not None:
            q = np.asarray(self.quad, dtype=float)
            if q.shape != (4, 2):
                raise ValueError(f"quad must have shape (4, 2), got {q.shape}")
            q = q.copy()
            q.flags.writeable = False
            object.__setattr__(self, "quad", q)

    @property
    def rowspan(self) -> int:
        return self.row_end - self.row_start + 1

    @property
    def colspan(self) -> int:
        return self.col_end - self.col_start + 1

    def span_key(self) -> tuple[int, int, int, int]:
        return (self.row_start, self.row_end, self.col_start, self.col_end)


@dataclass(frozen=True)
class LogicalTable:
    """A table as a rectangular partition of an R x C index grid."""

    rows: int
    cols: int
    image_w: float
    image_h: float
    cells: tuple[Cell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))

    def cell_at(self, r: int, c: int) -> Optional[Cell]:
        """The cell covering slot (r, c), or None if the slot is uncovered."""
        for cell in self.cells:
            if cell.row_start <= r <= cell.row_end and cell.col_start <= c <= cell.col_end:
                return cell
        return None

    def span_set(self) -> set[tuple[int, int, int, int]]:
        return {c.span_key() for c in self.cells}


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_logical_table: empty violations == valid table."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy when valid
        return self.ok


def validate_logical_table(table: LogicalTable) -> ValidationReport:
    """Check that a table's cells tile its R x C grid exactly once.

    Reports every violation rather than stopping at the first: index range
    errors, overlaps, gaps, and degenerate quads.
    """
    problems: list[str] = []
    if table.rows < 1 or table.cols < 1:
        problems.append(f"table must have at least 1 row and 1 column, got {table.rows}x{table.cols}")
        return ValidationReport(tuple(problems))

    coverage = np.zeros((table.rows, table.cols), dtype=np.int32)
    quads: list[tuple[int, np.ndarray]] = []
    for idx, cell in enumerate(table.cells):
        out_of_range = (
            cell.row_start < 0
            or cell.col_start < 0
            or cell.row_start > cell.row_end
            or cell.col_start > cell.col_end
            or cell.row_end >= table.rows
            or cell.col_end >= table.cols
        )
        if out_of_range:
            problems.append(f"cell {idx} span {cell.span_key()} out of range for {table.rows}x{table.cols}")
            continue
        coverage[cell.row_start : cell.row_end + 1, cell.col_start : cell.col_end + 1] += 1
        if cell.quad is not None:
            quads.append((idx, cell.quad))
    if quads:
        stacked = np.stack([q for _, q in quads])  # (K, 4, 2)
        x, y = stacked[..., 0], stacked[..., 1]
        areas = 0.5 * np.einsum("ij,ij->i", x, np.roll(y, -1, axis=1) - np.roll(y, 1, axis=1))
        for (idx, _), area in zip(quads, areas):
            if area <= 0:
                problems.append(f"cell {idx} quad has non-positive area")

    for r, c in zip(*np.nonzero(coverage > 1)):
        problems.append(f"overlap at ({r}, {c})")
    for r, c in zip(*np.nonzero(coverage == 0)):
        problems.append(f"gap at ({r}, {c})")
    return ValidationReport(tuple(problems))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GridLabel:
    """Ground-truth lattice: line/vertex/edge positivity, coordinates, references.

    ``vertex_x``/``vertex_y`` hold normalized positions for every lattice
    crossing inside the table extent (row lines 0..R, column lines 0..C),
    not only for positive vertexes; crossings outside the extent carry the
    ``-1`` sentinel. ``row_ref_free``/``col_ref_free`` are the per-line
    mean coordinates used to order query outputs, ``-1`` on negative
    lines; the fixed anchor coordinate is 0.25 on the frozen axis.
    """

    dims: GridDims
    row_positive: np.ndarray  # (m,) bool
    col_positive: np.ndarray  # (n,) bool
    vertex_positive: np.ndarray  # (m, n) bool
    vertex_x: np.ndarray  # (m, n) float
    vertex_y: np.ndarray  # (m, n) float
    down_edge: np.ndarray  # (m, n) bool
    right_edge: np.ndarray  # (m, n) bool
    row_ref_free: np.ndarray  # (m,) float
    col_ref_free: np.ndarray  # (n,) float
    ref_fixed: float = 0.25
    image_w: float = 1.0
    image_h: float = 1.0

    def __post_init__(self):
        m, n = self.dims.m, self.dims.n
        shapes = {
            "row_positive": (m,),
            "col_positive": (n,),
            "vertex_positive": (m, n),
            "vertex_x": (m, n),
            "vertex_y": (m, n),
            "down_edge": (m, n),
            "right_edge": (m, n),
            "row_ref_free": (m,),
            "col_ref_free": (n,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            dtype = bool if name.endswith(("positive", "edge")) else float
            object.__setattr__(self, name, _freeze(arr.astype(dtype)))

    @property
    def table_rows(self) -> int:
        return int(self.row_positive.sum()) - 1

    @property
    def table_cols(self) -> int:
        return int(self.col_positive.sum()) - 1


@dataclass(frozen=True)
class GridPrediction:
    """Model-output-shaped lattice: probabilities and regressed coordinates.

    Slot order is arbitrary (queries are unordered); reconstruction orders
    the selected slots by their reference predictions.
    """

    dims: GridDims
    row_prob: np.ndarray  # (m,)
    col_prob: np.ndarray  # (n,)
    vertex_x: np.ndarray  # (m, n), x from column queries, re-indexed (i, j)
    vertex_y: np.ndarray  # (m, n), y from row queries
    down_edge_prob: np.ndarray  # (m, n)
    right_edge_prob: np.ndarray  # (m, n)
    row_ref_pred: np.ndarray  # (m,)
    col_ref_pred: np.ndarray  # (n,)
    image_w: float = 1.0
    image_h: float = 1.0

    def __post_init__(self):
        m, n = self.dims.m, self.dims.n
        shapes = {
            "row_prob": (m,),
            "col_prob": (n,),
            "vertex_x": (m, n),
            "vertex_y": (m, n),
            "down_edge_prob": (m, n),
            "right_edge_prob": (m, n),
            "row_ref_pred": (m,),
            "col_ref_pred": (n,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _freeze(arr))
        for name in ("row_prob", "col_prob", "down_edge_prob", "right_edge_prob"):
            arr = getattr(self, name)
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")


def incident_positive_edges(
    down_edge: np.ndarray | GridLabel,
    right_edge: np.ndarray | None = None,
    i: int = 0,
    j: int = 0,
) -> int:
    """Count positive edges incident to vertex (i, j), 0..4.

    Accepts either a GridLabel or a pair of boolean edge arrays. The up
    edge of (i, j) is ``down_edge[i-1, j]`` and the left edge is
    ``right_edge[i, j-1]`` per the down/right storage convention.
    """
    if isinstance(down_edge, GridLabel):
        label = down_edge
        if right_edge is not None:  # positional misuse guard
            raise TypeError("pass (label, i=…, j=…) or (down, right, i, j)")
        down, right = label.down_edge, label.right_edge
    else:
        down, right = np.asarray(down_edge, dtype=bool), np.asarray(right_edge, dtype=bool)
    m, n = down.shape
    if not (0 <= i < m and 0 <= j < n):
        raise IndexError(f"vertex ({i}, {j}) outside {m}x{n} lattice")
    count = 0
    if i > 0 and down[i - 1, j]:
        count += 1
    if i < m - 1 and down[i, j]:
        count += 1
    if j > 0 and right[i, j - 1]:
        count += 1
    if j < n - 1 and right[i, j]:
        count += 1
    return count


@dataclass(frozen=True)
class GridStats:
    positive_rows: int
    positive_cols: int
    positive_vertexes: int
    positive_edges: int


def grid_stats(label: GridLabel) -> GridStats:
    """Exact counts of positive rows, columns, vertexes, and edges."""
    return GridStats(
        positive_rows=int(label.row_positive.sum()),
        positive_cols=int(label.col_positive.sum()),
        positive_vertexes=int(label.vertex_positive.sum()),
        positive_edges=int(label.down_edge.sum()) + int(label.right_edge.sum()),
    )
