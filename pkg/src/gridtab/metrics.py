"""Relation- and detection-based evaluation of reconstructed tables.

Cell identity is positional: a cell's id is its index in
``LogicalTable.cells``. Relations connect each cell to its nearest
neighbor to the right and below; by default blank cells participate like
any other (physical protocol), with ``skip_empty`` they are stepped over
and the relation lands on the next non-empty cell (content protocol).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from shapely.geometry import Polygon

from .grid import Cell, LogicalTable, quad_signed_area

__all__ = [
    "AdjacencyRelation",
    "PRF",
    "quad_iou",
    "adjacency_relations",
    "adjacency_f1",
    "cell_detection_fscore",
    "match_cells_by_iou",
]


@dataclass(frozen=True)
class AdjacencyRelation:
    """Directed neighbor pair: a is the left (horizontal) or top (vertical) cell."""

    a: int
    b: int
    direction: str  # "horizontal" | "vertical"

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("a relation needs two distinct cells")
        if self.direction not in ("horizontal", "vertical"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class PRF:
    """Precision/recall/F1 with the underlying counts."""

    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_gt: int = 0

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gt: int) -> "PRF":
        # Nothing to find and nothing found is a perfect score; an empty
        # denominator on one side only scores 0, never NaN.
        if n_pred == 0 and n_gt == 0:
            return cls(1.0, 1.0, 1.0, 0, 0, 0)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gt if n_gt else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision, recall, f1, tp, n_pred, n_gt)


def _is_rect(quad: np.ndarray) -> bool:
    return (
        quad[0, 0] == quad[3, 0]
        and quad[1, 0] == quad[2, 0]
        and quad[0, 1] == quad[1, 1]
        and quad[2, 1] == quad[3, 1]
    )


def quad_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two quads.

    Axis-aligned rectangles take the closed-form path; anything else goes
    through polygon intersection. Degenerate geometry scores 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape == b.shape and np.array_equal(a, b):
        return 1.0 if quad_signed_area(a) != 0 else 0.0
    if _is_rect(a) and _is_rect(b):
        ax1, ay1 = a[:, 0].min(), a[:, 1].min()
        ax2, ay2 = a[:, 0].max(), a[:, 1].max()
        bx1, by1 = b[:, 0].min(), b[:, 1].min()
        bx2, by2 = b[:, 0].max(), b[:, 1].max()
        iw = min(ax2, bx2) - max(ax1, bx1)
        ih = min(ay2, by2) - max(ay1, by1)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
        return inter / union if union > 0 else 0.0
    pa, pb = Polygon(a), Polygon(b)
    if not (pa.is_valid and pb.is_valid) or pa.area == 0 or pb.area == 0:
        return 0.0
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union if union > 0 else 0.0


def _owner_grid(table: LogicalTable) -> np.ndarray:
    owner = np.full((table.rows, table.cols), -1, dtype=np.int64)
    for k, cell in enumerate(table.cells):
        owner[cell.row_start : cell.row_end + 1, cell.col_start : cell.col_end + 1] = k
    return owner


def _is_blank(cell: Cell) -> bool:
    return not (cell.content or "").strip()


def adjacency_relations(table: LogicalTable, skip_empty: bool = False) -> frozenset[AdjacencyRelation]:
    """Neighbor relations of a valid table.

    For every cell and every row (column) it spans, walk right (down)
    from its far edge to the next cell; with ``skip_empty`` blank cells
    are transparent and the walk continues past them.
    """
    owner = _owner_grid(table)
    cells = table.cells
    relations: set[AdjacencyRelation] = set()
    for k, cell in enumerate(cells):
        if skip_empty and _is_blank(cell):
            continue
        for r in range(cell.row_start, cell.row_end + 1):
            c = cell.col_end + 1
            while c < table.cols:
                other = int(owner[r, c])
                if other >= 0 and not (skip_empty and _is_blank(cells[other])):
                    relations.add(AdjacencyRelation(k, other, "horizontal"))
                    break
                if other >= 0 and skip_empty and _is_blank(cells[other]):
                    c = cells[other].col_end + 1
                    continue
                c += 1
        for c in range(cell.col_start, cell.col_end + 1):
            r = cell.row_end + 1
            while r < table.rows:
                other = int(owner[r, c])
                if other >= 0 and not (skip_empty and _is_blank(cells[other])):
                    relations.add(AdjacencyRelation(k, other, "vertical"))
                    break
                if other >= 0 and skip_empty and _is_blank(cells[other]):
                    r = cells[other].row_end + 1
                    continue
                r += 1
    return frozenset(relations)


def _iou_matrix(pred_cells, gt_cells) -> np.ndarray:
    """Pairwise quad IoU with a bounding-box prefilter."""
    if not pred_cells or not gt_cells:
        return np.zeros((len(pred_cells), len(gt_cells)))
    pq = [np.asarray(c.quad, dtype=float) for c in pred_cells]
    gq = [np.asarray(c.quad, dtype=float) for c in gt_cells]
    pb = np.array([[q[:, 0].min(), q[:, 1].min(), q[:, 0].max(), q[:, 1].max()] for q in pq])
    gb = np.array([[q[:, 0].min(), q[:, 1].min(), q[:, 0].max(), q[:, 1].max()] for q in gq])
    overlap = (
        (pb[:, None, 0] < gb[None, :, 2])
        & (pb[:, None, 2] > gb[None, :, 0])
        & (pb[:, None, 1] < gb[None, :, 3])
        & (pb[:, None, 3] > gb[None, :, 1])
    )
    iou = np.zeros((len(pq), len(gq)))
    for i, j in zip(*np.nonzero(overlap)):
        iou[i, j] = quad_iou(pq[i], gq[j])
    return iou


def match_cells_by_iou(pred_cells, gt_cells, iou_thresh: float) -> dict[int, int]:
    """One-to-one map pred index -> gt index, Hungarian on IoU, thresholded."""
    for cells, side in ((pred_cells, "prediction"), (gt_cells, "ground truth")):
        for k, cell in enumerate(cells):
            if cell.quad is None:
                raise ValueError(f"{side} cell {k} has no quad; IoU matching impossible")
    iou = _iou_matrix(pred_cells, gt_cells)
    if iou.size == 0:
        return {}
    rows, cols = linear_sum_assignment(-iou)
    return {int(i): int(j) for i, j in zip(rows, cols) if iou[i, j] >= iou_thresh}


def _match_cells_logical(pred_cells, gt_cells) -> dict[int, int]:
    """Match by anchor slot: cells sharing (row_start, col_start) pair up."""
    gt_by_anchor = {(c.row_start, c.col_start): j for j, c in enumerate(gt_cells)}
    return {
        i: gt_by_anchor[(c.row_start, c.col_start)]
        for i, c in enumerate(pred_cells)
        if (c.row_start, c.col_start) in gt_by_anchor
    }


def adjacency_f1(
    pred: LogicalTable,
    gt: LogicalTable,
    match: str = "iou",
    iou_thresh: float = 0.6,
    skip_empty: bool = False,
) -> PRF:
    """Precision/recall/F1 over neighbor relations.

    Cells are matched one-to-one first (``iou``: Hungarian on quad IoU
    with acceptance threshold; ``logical``: same anchor slot). A
    predicted relation counts as a true positive iff both endpoints are
    matched and the mapped relation exists in the ground truth with the
    same direction.
    """
    pred_rel = adjacency_relations(pred, skip_empty=skip_empty)
    gt_rel = adjacency_relations(gt, skip_empty=skip_empty)
    if match == "iou":
        mapping = match_cells_by_iou(pred.cells, gt.cells, iou_thresh)
    elif match == "logical":
        mapping = _match_cells_logical(pred.cells, gt.cells)
    else:
        raise ValueError(f"unknown match mode {match!r}")
    tp = sum(
        1
        for rel in pred_rel
        if rel.a in mapping
        and rel.b in mapping
        and AdjacencyRelation(mapping[rel.a], mapping[rel.b], rel.direction) in gt_rel
    )
    return PRF.from_counts(tp, len(pred_rel), len(gt_rel))


def cell_detection_fscore(pred_cells, gt_cells, iou_thresh: float = 0.6) -> PRF:
    """Localization score: one-to-one IoU matching, TP iff IoU >= threshold."""
    mapping = match_cells_by_iou(list(pred_cells), list(gt_cells), iou_thresh)
    return PRF.from_counts(len(mapping), len(pred_cells), len(gt_cells))
