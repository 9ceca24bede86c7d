"""Bipartite assignment of query outputs to lines, and the loss terms.

All losses are pure scalar functions of arrays; nothing here computes
gradients. The toolkit scores model outputs, it does not train.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .grid import Cell, GridLabel, GridPrediction

__all__ = [
    "Assignment",
    "LossWeights",
    "FocalConfig",
    "MatchCostConfig",
    "hungarian",
    "matching_cost",
    "focal_loss",
    "giou",
    "giou_loss",
    "cell_bounding_rectangles",
    "coord_loss",
    "total_loss",
    "evaluate_losses",
]

_EPS = 1e-7


@dataclass(frozen=True)
class Assignment:
    """Optimal pairing (prediction index, target index) with its cost."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    def as_mapping(self) -> dict[int, int]:
        return {p: t for p, t in self.pairs}


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined objective; defaults balance the four tasks."""

    lambda_cls: float = 1.0
    lambda_coord: float = 5.0
    lambda_ref: float = 5.0
    lambda_edge: float = 5.0
    gamma_iou: float = 0.1

    def __post_init__(self):
        for name in ("lambda_cls", "lambda_coord", "lambda_ref", "lambda_edge", "gamma_iou"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class FocalConfig:
    alpha: float = 0.25
    gamma: float = 2.0


@dataclass(frozen=True)
class MatchCostConfig:
    """Weights of the line-matching cost: class term and reference L1 term."""

    w_cls: float = 1.0
    w_ref: float = 1.0


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-cost assignment of min(r, c) pairs for a finite cost matrix."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError(f"cost matrix must be 2-D and non-empty, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(zip(rows.tolist(), cols.tolist()))
    return Assignment(pairs=pairs, total_cost=float(cost[rows, cols].sum()))


def matching_cost(
    probs: np.ndarray,
    ref_preds: np.ndarray,
    gt_refs: np.ndarray,
    cfg: MatchCostConfig = MatchCostConfig(),
) -> np.ndarray:
    """Cost matrix between query slots and ground-truth lines.

    cost[i, j] = w_cls * (1 - prob_i) + w_ref * |ref_i - gt_j|.
    """
    probs = np.asarray(probs, dtype=float)
    ref_preds = np.asarray(ref_preds, dtype=float)
    gt_refs = np.asarray(gt_refs, dtype=float)
    if not (np.all(np.isfinite(probs)) and np.all(np.isfinite(ref_preds)) and np.all(np.isfinite(gt_refs))):
        raise ValueError("matching cost inputs must be finite")
    class_term = cfg.w_cls * (1.0 - probs)[:, None]
    ref_term = cfg.w_ref * np.abs(ref_preds[:, None] - gt_refs[None, :])
    return class_term + ref_term


def focal_loss(probs: np.ndarray, targets: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """Mean focal loss: -alpha_t * (1 - p_t)^gamma * log(p_t).

    p_t is the probability of the true class; probabilities are clamped
    to [eps, 1 - eps] before the log.
    """
    probs = np.asarray(probs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if probs.shape != targets.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {targets.shape}")
    p = np.clip(probs, _EPS, 1.0 - _EPS)
    p_t = np.where(targets > 0.5, p, 1.0 - p)
    alpha_t = np.where(targets > 0.5, alpha, 1.0 - alpha)
    return float(np.mean(-alpha_t * (1.0 - p_t) ** gamma * np.log(p_t)))


def giou(a: np.ndarray, b: np.ndarray) -> float:
    """Generalized IoU of two [x1, y1, x2, y2] boxes, in (-1, 1].

    IoU minus the fraction of the enclosing hull not covered by the
    union; degenerate boxes contribute zero area.
    """
    ax1, ay1, ax2, ay2 = np.asarray(a, dtype=float)
    bx1, by1, bx2, by2 = np.asarray(b, dtype=float)
    if ax1 > ax2 or ay1 > ay2 or bx1 > bx2 or by1 > by2:
        raise ValueError("boxes must satisfy x1 <= x2 and y1 <= y2")
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = area_a + area_b - inter
    iou = inter / union if union > 0 else 0.0
    hull = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    if hull <= 0:
        return iou
    return iou - (hull - union) / hull


def giou_loss(a: np.ndarray, b: np.ndarray) -> float:
    return 1.0 - giou(a, b)


def cell_bounding_rectangles(
    vertex_x: np.ndarray,
    vertex_y: np.ndarray,
    cells: list[Cell] | tuple[Cell, ...],
    vertex_positive: np.ndarray | None = None,
) -> np.ndarray:
    """Axis-aligned bounding rectangle of each cell's corner vertexes, (K, 4).

    Coordinates are read from the given lattice arrays at the cells'
    corner lattice points. When a positivity mask is supplied, a cell
    whose corner falls on a negative vertex is an error.
    """
    rects = np.empty((len(cells), 4))
    for k, cell in enumerate(cells):
        corners = (
            (cell.row_start, cell.col_start),
            (cell.row_start, cell.col_end + 1),
            (cell.row_end + 1, cell.col_start),
            (cell.row_end + 1, cell.col_end + 1),
        )
        if vertex_positive is not None:
            for i, j in corners:
                if not vertex_positive[i, j]:
                    raise ValueError(f"cell {k} references negative vertex ({i}, {j})")
        xs = [vertex_x[i, j] for i, j in corners]
        ys = [vertex_y[i, j] for i, j in corners]
        rects[k] = (min(xs), min(ys), max(xs), max(ys))
    return rects


def coord_loss(l1_row: float, l1_col: float, iou_term: float, gamma_iou: float = 0.1) -> float:
    """Position-regression term: L1 on both axes plus the weighted GIoU term."""
    return l1_row + l1_col + gamma_iou * iou_term


def total_loss(cls: float, coord: float, ref: float, edge: float, weights: LossWeights = LossWeights()) -> float:
    """Weighted combination of the four task losses."""
    return (
        weights.lambda_cls * cls
        + weights.lambda_coord * coord
        + weights.lambda_ref * ref
        + weights.lambda_edge * edge
    )


def _full_permutation(assignment: Assignment, lines: np.ndarray, n_slots: int) -> np.ndarray:
    """Extend matched (slot, target) pairs to a full slot permutation.

    ``lines[target]`` is the lattice line of each matching target;
    perm[line] = slot for matched lines, and unmatched slots fill the
    remaining line positions in increasing order (deterministic, and the
    identity for canonical predictions).
    """
    perm = np.full(n_slots, -1, dtype=np.int64)
    used = np.zeros(n_slots, dtype=bool)
    for slot, target in assignment.pairs:
        perm[lines[target]] = slot
        used[slot] = True
    free = iter(np.nonzero(~used)[0].tolist())
    for pos in range(n_slots):
        if perm[pos] < 0:
            perm[pos] = next(free)
    return perm


def evaluate_losses(
    pred: GridPrediction,
    label: GridLabel,
    cells: list[Cell] | tuple[Cell, ...] | None = None,
    weights: LossWeights = LossWeights(),
    focal: FocalConfig = FocalConfig(),
    match: MatchCostConfig = MatchCostConfig(),
) -> dict[str, float]:
    """All loss terms between a prediction and a label.

    Query slots are first assigned to the label's positive lines by the
    Hungarian algorithm on the matching cost, then every term is computed
    in line order. ``cells`` (for the cell-rectangle GIoU term) defaults
    to the cells recovered by reconstructing the label itself.
    """
    from .reconstruct import ReconstructionConfig, reconstruct_table
    from .synth import perfect_prediction

    m, n = label.dims.m, label.dims.n
    pos_rows = np.nonzero(label.row_positive)[0]
    pos_cols = np.nonzero(label.col_positive)[0]
    row_assign = hungarian(matching_cost(pred.row_prob, pred.row_ref_pred, label.row_ref_free[pos_rows], match))
    col_assign = hungarian(matching_cost(pred.col_prob, pred.col_ref_pred, label.col_ref_free[pos_cols], match))
    row_perm = _full_permutation(row_assign, pos_rows, m)
    col_perm = _full_permutation(col_assign, pos_cols, n)

    row_targets = label.row_positive.astype(float)
    col_targets = label.col_positive.astype(float)
    cls = focal_loss(pred.row_prob[row_perm], row_targets, focal.alpha, focal.gamma) + focal_loss(
        pred.col_prob[col_perm], col_targets, focal.alpha, focal.gamma
    )

    vy = pred.vertex_y[np.ix_(row_perm, col_perm)]
    vx = pred.vertex_x[np.ix_(row_perm, col_perm)]
    mask = label.vertex_positive
    l1_row = float(np.abs(vy[mask] - label.vertex_y[mask]).mean()) if mask.any() else 0.0
    l1_col = float(np.abs(vx[mask] - label.vertex_x[mask]).mean()) if mask.any() else 0.0

    if cells is None:
        cells = reconstruct_table(perfect_prediction(label), ReconstructionConfig()).cells
    pred_rects = cell_bounding_rectangles(vx, vy, cells)
    gt_rects = cell_bounding_rectangles(label.vertex_x, label.vertex_y, cells, label.vertex_positive)
    iou_term = float(np.mean([giou_loss(pa, ga) for pa, ga in zip(pred_rects, gt_rects)])) if len(cells) else 0.0
    coord = coord_loss(l1_row, l1_col, iou_term, weights.gamma_iou)

    ref_row = float(np.abs(pred.row_ref_pred[row_perm][pos_rows] - label.row_ref_free[pos_rows]).mean())
    ref_col = float(np.abs(pred.col_ref_pred[col_perm][pos_cols] - label.col_ref_free[pos_cols]).mean())
    ref = ref_row + ref_col

    down = pred.down_edge_prob[np.ix_(row_perm, col_perm)]
    right = pred.right_edge_prob[np.ix_(row_perm, col_perm)]
    edge = focal_loss(down, label.down_edge.astype(float), focal.alpha, focal.gamma) + focal_loss(
        right, label.right_edge.astype(float), focal.alpha, focal.gamma
    )

    return {
        "cls": cls,
        "l1_row": l1_row,
        "l1_col": l1_col,
        "iou": iou_term,
        "coord": coord,
        "ref": ref,
        "edge": edge,
        "total": total_loss(cls, coord, ref, edge, weights),
    }
