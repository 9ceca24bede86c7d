"""Turn a grid prediction back into a logical table.

Pipeline: threshold line scores, order the survivors by their reference
predictions, threshold edges, classify vertexes from incident edges, then
flood-fill unit cells into rectangular table cells.

Vertex rule: a vertex is kept iff at least 3 incident edges are positive,
or it is one of the four extreme corners of the selected subgrid with its
2 perpendicular border edges positive. Rationale: in a rectangular
partition every interior cell corner is a T- or X-junction (3 or 4
boundary segments meet there), the four table corners have exactly 2
perpendicular edges, and a plain border pass-through point has exactly 2
collinear edges and is never a corner. See README for the full argument.

Edges of a selected line connect it to the *next selected* line in sorted
order: each line's downward/rightward edge row is interpreted against the
assembled subgrid, which for contiguous selections coincides with the
stored lattice adjacency.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTableError, ReconstructionError, StructureInconsistencyError
from .grid import Cell, GridPrediction, LogicalTable, validate_logical_table
from .ingest import HtmlTokenStream

__all__ = [
    "ReconstructionConfig",
    "ActiveSubgrid",
    "select_and_sort",
    "classify_vertexes",
    "group_cells",
    "reconstruct_table",
    "to_html",
]

# Sorted reference predictions closer than this are flagged as probable
# duplicate queries for the same line.
_NEAR_DUPLICATE_GAP = 1e-4


@dataclass(frozen=True)
class ReconstructionConfig:
    """Score thresholds: tau1 for row/column selection, tau2 for edges."""

    tau1: float = 0.5
    tau2: float = 0.4

    def __post_init__(self):
        if not (0.0 < self.tau1 < 1.0 and 0.0 < self.tau2 < 1.0):
            raise ValueError("thresholds must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class ActiveSubgrid:
    """Selected row/column lines in reading order with their references."""

    row_lines: np.ndarray  # (p,) original slot indices, sorted by reference
    row_refs: np.ndarray  # (p,)
    col_lines: np.ndarray  # (q,)
    col_refs: np.ndarray  # (q,)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_lines), len(self.col_lines)

    def gather_edges(self, pred: GridPrediction, tau2: float) -> tuple[np.ndarray, np.ndarray]:
        """Thresholded subgrid edge masks, indexed by subgrid position."""
        ix = np.ix_(self.row_lines, self.col_lines)
        return pred.down_edge_prob[ix] > tau2, pred.right_edge_prob[ix] > tau2

    def gather_coords(self, pred: GridPrediction) -> tuple[np.ndarray, np.ndarray]:
        ix = np.ix_(self.row_lines, self.col_lines)
        return pred.vertex_x[ix], pred.vertex_y[ix]


def select_and_sort(pred: GridPrediction, cfg: ReconstructionConfig) -> ActiveSubgrid:
    """Keep lines scoring above tau1 and order them by reference prediction.

    Sorting is stable, so ties fall back to slot order. Raises
    DegenerateTableError when fewer than 2 rows or 2 columns survive.
    """

    def pick(probs: np.ndarray, refs: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
        selected = np.nonzero(probs > cfg.tau1)[0]
        if len(selected) < 2:
            raise DegenerateTableError(
                f"only {len(selected)} {kind} line(s) above tau1={cfg.tau1}; need at least 2"
            )
        order = np.argsort(refs[selected], kind="stable")
        lines = selected[order]
        sorted_refs = refs[lines]
        if np.any(np.diff(sorted_refs) < _NEAR_DUPLICATE_GAP):
            warnings.warn(
                f"near-duplicate {kind} reference points (gap < {_NEAR_DUPLICATE_GAP}); "
                "keeping all selected lines",
                stacklevel=3,
            )
        return lines, sorted_refs

    row_lines, row_refs = pick(pred.row_prob, pred.row_ref_pred, "row")
    col_lines, col_refs = pick(pred.col_prob, pred.col_ref_pred, "column")
    return ActiveSubgrid(row_lines, row_refs, col_lines, col_refs)


def classify_vertexes(down: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Vertex positivity on a subgrid from thresholded edge masks.

    ``down``/``right`` are (p, q) boolean arrays in subgrid coordinates;
    the last down row and last right column are ignored (those edges do
    not exist).
    """
    down = np.asarray(down, dtype=bool)
    right = np.asarray(right, dtype=bool)
    p, q = down.shape
    counts = np.zeros((p, q), dtype=np.int8)
    segs_v = down[: p - 1, :]
    segs_h = right[:, : q - 1]
    counts[:-1, :] += segs_v
    counts[1:, :] += segs_v
    counts[:, :-1] += segs_h
    counts[:, 1:] += segs_h
    positive = counts >= 3
    for ci, cj in ((0, 0), (0, q - 1), (p - 1, 0), (p - 1, q - 1)):
        positive[ci, cj] = counts[ci, cj] >= 2
    return positive


def group_cells(
    down: np.ndarray,
    right: np.ndarray,
    vertex_positive: np.ndarray | None = None,
) -> list[tuple[int, int, int, int]]:
    """Flood-fill unit cells into table cells; returns inclusive spans.

    Two horizontally neighboring unit cells merge iff the vertical segment
    between them (the down edge on the shared column line) is negative;
    vertical neighbors merge iff the horizontal segment between them is
    negative. Every component must form a full rectangle whose four
    corner vertexes are classified positive, otherwise the edge picture is
    structurally inconsistent and the offending component is reported.
    """
    down = np.asarray(down, dtype=bool)
    right = np.asarray(right, dtype=bool)
    p, q = down.shape
    if p < 2 or q < 2:
        raise DegenerateTableError(f"subgrid {p}x{q} has no unit cell")
    if vertex_positive is None:
        vertex_positive = classify_vertexes(down, right)

    nr, nc = p - 1, q - 1
    comp = np.full((nr, nc), -1, dtype=np.int32)
    spans: list[tuple[int, int, int, int]] = []
    for a0 in range(nr):
        for b0 in range(nc):
            if comp[a0, b0] >= 0:
                continue
            cid = len(spans)
            comp[a0, b0] = cid
            queue = deque([(a0, b0)])
            members = [(a0, b0)]
            while queue:
                a, b = queue.popleft()
                if b + 1 < nc and comp[a, b + 1] < 0 and not down[a, b + 1]:
                    comp[a, b + 1] = cid
                    queue.append((a, b + 1))
                    members.append((a, b + 1))
                if b - 1 >= 0 and comp[a, b - 1] < 0 and not down[a, b]:
                    comp[a, b - 1] = cid
                    queue.append((a, b - 1))
                    members.append((a, b - 1))
                if a + 1 < nr and comp[a + 1, b] < 0 and not right[a + 1, b]:
                    comp[a + 1, b] = cid
                    queue.append((a + 1, b))
                    members.append((a + 1, b))
                if a - 1 >= 0 and comp[a - 1, b] < 0 and not right[a, b]:
                    comp[a - 1, b] = cid
                    queue.append((a - 1, b))
                    members.append((a - 1, b))
            ra = [m[0] for m in members]
            cb = [m[1] for m in members]
            lo_r, hi_r, lo_c, hi_c = min(ra), max(ra), min(cb), max(cb)
            if len(members) != (hi_r - lo_r + 1) * (hi_c - lo_c + 1):
                raise StructureInconsistencyError(
                    f"non-rectangular cell component of {len(members)} unit cells "
                    f"in rows {lo_r}..{hi_r}, cols {lo_c}..{hi_c}",
                    component=members,
                )
            corners = ((lo_r, lo_c), (lo_r, hi_c + 1), (hi_r + 1, lo_c), (hi_r + 1, hi_c + 1))
            if not all(vertex_positive[i, j] for i, j in corners):
                raise StructureInconsistencyError(
                    f"cell component rows {lo_r}..{hi_r}, cols {lo_c}..{hi_c} "
                    "has a corner that is not a positive vertex",
                    component=members,
                )
            spans.append((lo_r, hi_r, lo_c, hi_c))
    return spans


def reconstruct_table(pred: GridPrediction, cfg: ReconstructionConfig | None = None) -> LogicalTable:
    """Full reconstruction: selection, ordering, edges, vertexes, cells.

    Deterministic; raises DegenerateTableError or
    StructureInconsistencyError on predictions that do not describe a
    table. Quads are read from the predicted vertex coordinates at each
    cell's corner lattice points and denormalized by the prediction's
    image size.
    """
    cfg = cfg or ReconstructionConfig()
    sub = select_and_sort(pred, cfg)
    down, right = sub.gather_edges(pred, cfg.tau2)
    vertex_ok = classify_vertexes(down, right)
    spans = group_cells(down, right, vertex_ok)
    vx, vy = sub.gather_coords(pred)
    w, h = pred.image_w, pred.image_h

    cells = []
    for r0, r1, c0, c1 in sorted(spans):
        corners = ((r0, c0), (r0, c1 + 1), (r1 + 1, c1 + 1), (r1 + 1, c0))
        quad = np.array([[vx[i, j] * w, vy[i, j] * h] for i, j in corners])
        cells.append(Cell(r0, r1, c0, c1, quad=quad))

    p, q = sub.shape
    table = LogicalTable(rows=p - 1, cols=q - 1, image_w=w, image_h=h, cells=tuple(cells))
    report = validate_logical_table(table)
    if not report.ok:
        raise ReconstructionError(f"reconstructed table is invalid: {report.violations[0]}")
    return table


def to_html(table: LogicalTable, with_content: bool = False) -> HtmlTokenStream:
    """Serialize a table as flat table>tr>td structure tokens.

    Each cell is emitted in its anchor row at its anchor column with
    rowspan/colspan attributes where the span exceeds 1; the inverse of
    parse_html_structure.
    """
    report = validate_logical_table(table)
    if not report.ok:
        raise ValueError(f"cannot serialize invalid table: {report.violations[0]}")
    by_row: list[list[Cell]] = [[] for _ in range(table.rows)]
    for cell in table.cells:
        by_row[cell.row_start].append(cell)
    tokens = ["<table>"]
    for row_cells in by_row:
        tokens.append("<tr>")
        for cell in sorted(row_cells, key=lambda c: c.col_start):
            attrs = ""
            if cell.colspan > 1:
                attrs += f' colspan="{cell.colspan}"'
            if cell.rowspan > 1:
                attrs += f' rowspan="{cell.rowspan}"'
            tokens.append(f"<td{attrs}>")
            if with_content and cell.content:
                tokens.append(cell.content)
            tokens.append("</td>")
        tokens.append("</tr>")
    tokens.append("</table>")
    return HtmlTokenStream(tuple(tokens))
