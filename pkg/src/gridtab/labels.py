"""Target generation: grid labels, reference points, and the proposal lattice.

The anchor fraction 1/4 used for reference points (``anchor_tau``) is a
different constant from the reconstruction score thresholds
(``ReconstructionConfig.tau1``/``tau2``); the two families are kept under
distinct names on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelError
from .grid import COORD_SENTINEL, GridDims, GridLabel, LogicalTable, validate_logical_table

__all__ = [
    "ANCHOR_FRACTION",
    "TOP_K_PROPOSALS",
    "ReferencePoint",
    "ProposalLattice",
    "build_grid_label",
    "build_reference_labels",
    "build_proposal_lattice",
    "assign_proposal_targets",
]

# Anchor position of reference points on the frozen axis: 1/4 of the span.
ANCHOR_FRACTION = 0.25

# Selection budget of the proposal scoring stage.
TOP_K_PROPOSALS = 80


@dataclass(frozen=True)
class ReferencePoint:
    """Per-line anchor: frozen-axis coordinate, regressed-axis coordinate."""

    fixed_coord: float
    free_coord: float
    positive: bool


def _bilinear_lattice(cell_quad: np.ndarray, nr: int, nc: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions of the (nr+1) x (nc+1) lattice crossings covered by one cell.

    Logical-fraction bilinear interpolation of the quad corners; exact at
    the corners, linear along the borders.
    """
    tl, tr, br, bl = (np.asarray(cell_quad[k], dtype=float) for k in range(4))
    u = np.linspace(0.0, 1.0, nr + 1)[:, None, None]  # down the cell
    v = np.linspace(0.0, 1.0, nc + 1)[None, :, None]  # across the cell
    p = (1 - u) * (1 - v) * tl + (1 - u) * v * tr + u * v * br + u * (1 - v) * bl
    return p[..., 0], p[..., 1]


def build_grid_label(table: LogicalTable, dims: GridDims) -> GridLabel:
    """Generate the ground-truth lattice for a valid table.

    Row lines 0..R and column lines 0..C are positive; a vertex is positive
    iff it is a corner of at least one cell; a unit edge is positive iff it
    lies on some cell boundary. Coordinates are filled for every crossing
    inside the table extent: cell corners take the (mean of coincident)
    quad corners, border and interior crossings of spanning cells are
    interpolated from that cell's quad, so that every row/column line has a
    well-defined mean position.
    """
    report = validate_logical_table(table)
    if not report.ok:
        extra = f" (+{len(report.violations) - 1} more)" if len(report.violations) > 1 else ""
        raise LabelError(f"invalid table: {report.violations[0]}{extra}")
    rows, cols = table.rows, table.cols
    if not dims.fits(rows, cols):
        raise LabelError(f"{rows}x{cols} table does not fit a {dims.m}x{dims.n} lattice")

    m, n = dims.m, dims.n
    row_positive = np.zeros(m, dtype=bool)
    col_positive = np.zeros(n, dtype=bool)
    row_positive[: rows + 1] = True
    col_positive[: cols + 1] = True

    vertex_positive = np.zeros((m, n), dtype=bool)
    down_edge = np.zeros((m, n), dtype=bool)
    right_edge = np.zeros((m, n), dtype=bool)
    # Cell-corner coordinates are authoritative (averaged when several
    # cells share a corner); interpolated border/interior points of
    # spanning cells only fill crossings that are nobody's corner.
    corner_sum = np.zeros((m, n, 2))
    corner_cnt = np.zeros((m, n), dtype=np.int32)
    interp_sum = np.zeros((m, n, 2))
    interp_cnt = np.zeros((m, n), dtype=np.int32)

    for idx, cell in enumerate(table.cells):
        if cell.quad is None:
            raise LabelError(f"cell {idx} has no quad; label generation needs full geometry")
        r0, r1, c0, c1 = cell.row_start, cell.row_end, cell.col_start, cell.col_end
        top, bottom = r0, r1 + 1
        left, right = c0, c1 + 1
        vertex_positive[top, left] = vertex_positive[top, right] = True
        vertex_positive[bottom, left] = vertex_positive[bottom, right] = True
        right_edge[top, left:right] = True
        right_edge[bottom, left:right] = True
        down_edge[top:bottom, left] = True
        down_edge[top:bottom, right] = True

        quad = np.asarray(cell.quad)
        if bottom - top == 1 and right - left == 1:
            for (i, j), corner in zip(
                ((top, left), (top, right), (bottom, right), (bottom, left)), quad
            ):
                corner_sum[i, j] += corner
                corner_cnt[i, j] += 1
            continue
        xs, ys = _bilinear_lattice(quad, bottom - top, right - left)
        corner_mask = np.zeros(xs.shape, dtype=bool)
        corner_mask[0, 0] = corner_mask[0, -1] = corner_mask[-1, 0] = corner_mask[-1, -1] = True
        block = np.s_[top : bottom + 1, left : right + 1]
        corner_sum[block][..., 0] += np.where(corner_mask, xs, 0.0)
        corner_sum[block][..., 1] += np.where(corner_mask, ys, 0.0)
        corner_cnt[block] += corner_mask
        interp_sum[block][..., 0] += np.where(corner_mask, 0.0, xs)
        interp_sum[block][..., 1] += np.where(corner_mask, 0.0, ys)
        interp_cnt[block] += ~corner_mask

    vertex_x = np.full((m, n), COORD_SENTINEL)
    vertex_y = np.full((m, n), COORD_SENTINEL)
    only_interp = (corner_cnt == 0) & (interp_cnt > 0)
    vertex_x[only_interp] = interp_sum[only_interp, 0] / interp_cnt[only_interp] / table.image_w
    vertex_y[only_interp] = interp_sum[only_interp, 1] / interp_cnt[only_interp] / table.image_h
    cornered = corner_cnt > 0
    vertex_x[cornered] = corner_sum[cornered, 0] / corner_cnt[cornered] / table.image_w
    vertex_y[cornered] = corner_sum[cornered, 1] / corner_cnt[cornered] / table.image_h

    row_ref_free = np.full(m, COORD_SENTINEL)
    col_ref_free = np.full(n, COORD_SENTINEL)
    for i in range(rows + 1):
        if not vertex_positive[i, : cols + 1].any():
            raise LabelError(f"positive row line {i} has no positive vertex")
        row_ref_free[i] = vertex_y[i, : cols + 1].mean()
    for j in range(cols + 1):
        if not vertex_positive[: rows + 1, j].any():
            raise LabelError(f"positive column line {j} has no positive vertex")
        col_ref_free[j] = vertex_x[: rows + 1, j].mean()

    return GridLabel(
        dims=dims,
        row_positive=row_positive,
        col_positive=col_positive,
        vertex_positive=vertex_positive,
        vertex_x=vertex_x,
        vertex_y=vertex_y,
        down_edge=down_edge,
        right_edge=right_edge,
        row_ref_free=row_ref_free,
        col_ref_free=col_ref_free,
        image_w=table.image_w,
        image_h=table.image_h,
    )


def build_reference_labels(label: GridLabel) -> tuple[list[ReferencePoint], list[ReferencePoint]]:
    """Reference points for every line of the lattice.

    A positive row line's free coordinate is the mean y over its crossings
    inside the table extent; the fixed coordinate is the 1/4 anchor.
    Columns are symmetric with mean x. Negative lines get sentinel points.
    """
    in_table = label.row_positive[:, None] & label.col_positive[None, :]
    row_ref: list[ReferencePoint] = []
    for i in range(label.dims.m):
        if not label.row_positive[i]:
            row_ref.append(ReferencePoint(COORD_SENTINEL, COORD_SENTINEL, False))
            continue
        if not label.vertex_positive[i].any():
            raise LabelError(f"positive row line {i} has no positive vertex")
        ys = label.vertex_y[i][in_table[i]]
        row_ref.append(ReferencePoint(ANCHOR_FRACTION, float(ys.mean()), True))
    col_ref: list[ReferencePoint] = []
    for j in range(label.dims.n):
        if not label.col_positive[j]:
            col_ref.append(ReferencePoint(COORD_SENTINEL, COORD_SENTINEL, False))
            continue
        if not label.vertex_positive[:, j].any():
            raise LabelError(f"positive column line {j} has no positive vertex")
        xs = label.vertex_x[:, j][in_table[:, j]]
        col_ref.append(ReferencePoint(ANCHOR_FRACTION, float(xs.mean()), True))
    return row_ref, col_ref


@dataclass(frozen=True)
class ProposalLattice:
    """Fixed proposal points on an encoded feature map of size h x w.

    Row proposals sit at (anchor_x, y_i) for y_i in 0..h step 1, column
    proposals at (x_j, anchor_y); anchors are at a quarter of the
    respective feature-map dimension.
    """

    feature_h: int
    feature_w: int
    row_anchor_x: float
    col_anchor_y: float
    row_points: np.ndarray  # (h+1, 2) of (x, y)
    col_points: np.ndarray  # (w+1, 2)


def build_proposal_lattice(feature_h: int, feature_w: int) -> ProposalLattice:
    """Proposal points for a feature map; counts are h+1 rows and w+1 columns."""
    if feature_h < 1 or feature_w < 1:
        raise ValueError("feature dims must be >= 1")
    anchor_x = feature_w / 4.0
    anchor_y = feature_h / 4.0
    ys = np.arange(feature_h + 1, dtype=float)
    xs = np.arange(feature_w + 1, dtype=float)
    row_points = np.stack([np.full_like(ys, anchor_x), ys], axis=1)
    col_points = np.stack([xs, np.full_like(xs, anchor_y)], axis=1)
    return ProposalLattice(feature_h, feature_w, anchor_x, anchor_y, row_points, col_points)


def assign_proposal_targets(
    lattice: ProposalLattice,
    row_refs: list[ReferencePoint],
    col_refs: list[ReferencePoint],
) -> tuple[np.ndarray, np.ndarray]:
    """Match each positive reference to its nearest proposal on the free axis.

    Returns (row_target, col_target) arrays of free-coordinate targets,
    NaN for unassigned (negative) proposals. Each positive row reference
    claims the proposal whose normalized y is nearest (ties to the lower
    index); a proposal already claimed falls through to the next nearest.
    """
    def assign(points_free: np.ndarray, refs: list[ReferencePoint]) -> np.ndarray:
        targets = np.full(points_free.shape[0], np.nan)
        taken = np.zeros(points_free.shape[0], dtype=bool)
        for ref in refs:
            if not ref.positive:
                continue
            order = np.argsort(np.abs(points_free - ref.free_coord), kind="stable")
            for k in order:
                if not taken[k]:
                    taken[k] = True
                    targets[k] = ref.free_coord
                    break
        return targets

    row_free = lattice.row_points[:, 1] / lattice.feature_h
    col_free = lattice.col_points[:, 0] / lattice.feature_w
    return assign(row_free, row_refs), assign(col_free, col_refs)
