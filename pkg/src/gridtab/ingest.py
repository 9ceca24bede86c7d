"""Parse raw table annotations into logical tables.

Two annotation styles are supported: HTML structure tokens with per-cell
geometry, where boxes are either cell-level quads (kept verbatim) or
text-line-level boxes (normalized into a separator lattice first).

Box alignment follows td reading order; an empty cell is marked by an
explicit ``null`` in the box list, so the list always has one entry per
td. Text-line normalization is only defined for axis-aligned input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .errors import AnnotationError
from .grid import Cell, LogicalTable, validate_logical_table

__all__ = [
    "HtmlTokenStream",
    "StructureGrid",
    "RawAnnotation",
    "parse_html_structure",
    "normalize_textline_boxes",
    "ingest",
    "raw_annotation_from_dict",
]

_TAG_RE = re.compile(r"^<(/?)(table|thead|tbody|tr|td)((?:\s+\w+=\"[^\"]*\")*)\s*>$")
_ATTR_RE = re.compile(r"(\w+)=\"([^\"]*)\"")
_SPLIT_RE = re.compile(r"(<[^>]*>)")


@dataclass(frozen=True)
class HtmlTokenStream:
    """Ordered structural tokens; text between <td> and </td> is cell content."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_html(cls, text: str) -> "HtmlTokenStream":
        parts = [p for p in _SPLIT_RE.split(text) if p.strip()]
        return cls(tuple(parts))

    def to_html(self) -> str:
        return "".join(self.tokens)


@dataclass(frozen=True)
class StructureGrid:
    """Logical structure recovered from HTML: R, C, and per-td spans."""

    rows: int
    cols: int
    spans: tuple[tuple[int, int, int, int], ...]  # (row_start, row_end, col_start, col_end)
    contents: tuple[Optional[str], ...] = ()


def _parse_td_attrs(attrs: str) -> tuple[int, int]:
    rowspan = colspan = 1
    for name, value in _ATTR_RE.findall(attrs):
        if name in ("rowspan", "colspan"):
            try:
                span = int(value)
            except ValueError as exc:
                raise AnnotationError(f"non-integer {name}={value!r}") from exc
            if span < 1:
                raise AnnotationError(f"{name} must be >= 1, got {span}")
            if name == "rowspan":
                rowspan = span
            else:
                colspan = span
    return rowspan, colspan


def parse_html_structure(stream: HtmlTokenStream) -> StructureGrid:
    """Assign each td its span indices by the standard occupancy scan.

    Rows fill left to right, skipping slots claimed by rowspans from
    above; R is the number of <tr> and C the maximal occupied column + 1.
    <thead>/<tbody> wrappers are accepted and flattened. Raises
    AnnotationError on unbalanced tokens, overlaps forced by spans, or
    ragged rows (any slot of the R x C grid left uncovered).
    """
    occupied: dict[tuple[int, int], int] = {}
    spans: list[tuple[int, int, int, int]] = []
    contents: list[Optional[str]] = []
    stack: list[str] = []
    row = -1
    table_seen = False

    for token in stream.tokens:
        match = _TAG_RE.match(token.strip())
        if match is None:
            if stack and stack[-1] == "td":
                text = token if contents[-1] is None else contents[-1] + token
                contents[-1] = text
                continue
            raise AnnotationError(f"unexpected text outside a cell: {token!r}")
        closing, tag, attrs = match.group(1) == "/", match.group(2), match.group(3)

        if closing:
            if not stack or stack[-1] != tag:
                raise AnnotationError(f"unbalanced </{tag}> (open stack: {stack})")
            stack.pop()
            continue
        if tag == "table":
            if table_seen:
                raise AnnotationError("nested or repeated <table>")
            table_seen = True
            stack.append(tag)
        elif tag in ("thead", "tbody"):
            if not stack or stack[-1] != "table":
                raise AnnotationError(f"<{tag}> outside <table>")
            stack.append(tag)
        elif tag == "tr":
            if not stack or stack[-1] not in ("table", "thead", "tbody"):
                raise AnnotationError("<tr> outside <table>")
            stack.append(tag)
            row += 1
        elif tag == "td":
            if not stack or stack[-1] != "tr":
                raise AnnotationError("<td> outside <tr>")
            stack.append(tag)
            rowspan, colspan = _parse_td_attrs(attrs)
            col = 0
            while (row, col) in occupied:
                col += 1
            for r in range(row, row + rowspan):
                for c in range(col, col + colspan):
                    if (r, c) in occupied:
                        raise AnnotationError(f"rowspan/colspan forces overlap at ({r}, {c})")
                    occupied[(r, c)] = len(spans)
            spans.append((row, row + rowspan - 1, col, col + colspan - 1))
            contents.append(None)

    if stack:
        raise AnnotationError(f"unclosed tags: {stack}")
    if not table_seen or row < 0 or not spans:
        raise AnnotationError("no table rows found")

    rows = row + 1
    cols = 1 + max(c for _, c in occupied)
    max_row = max(r for r, _ in occupied)
    if max_row >= rows:
        raise AnnotationError(f"rowspan extends past the last row (to row {max_row})")
    for r in range(rows):
        for c in range(cols):
            if (r, c) not in occupied:
                raise AnnotationError(f"ragged rows: no cell covers ({r}, {c})")
    return StructureGrid(rows=rows, cols=cols, spans=tuple(spans), contents=tuple(contents))


def _as_bbox(box: Any) -> np.ndarray:
    """Normalize a box given as [x1,y1,x2,y2] or an axis-aligned quad."""
    arr = np.asarray(box, dtype=float)
    if arr.shape == (4,):
        x1, y1, x2, y2 = arr
    elif arr.shape == (4, 2):
        xs, ys = arr[:, 0], arr[:, 1]
        if not (np.isclose(xs.min(), xs).sum() == 2 and np.isclose(ys.min(), ys).sum() == 2):
            raise AnnotationError("text-line normalization needs axis-aligned boxes")
        x1, y1, x2, y2 = xs.min(), ys.min(), xs.max(), ys.max()
    else:
        raise AnnotationError(f"box must be [x1,y1,x2,y2] or a 4-point quad, got shape {arr.shape}")
    if not (x1 < x2 and y1 < y2):
        raise AnnotationError(f"degenerate box [{x1},{y1},{x2},{y2}]")
    return np.array([x1, y1, x2, y2])


def _rect_quad(x1: float, y1: float, x2: float, y2: float) -> np.ndarray:
    return np.array([[x1, y1], [x2, y1], [x2, y2], [x1, y2]])


def normalize_textline_boxes(
    structure: StructureGrid,
    boxes: Sequence[Any],
    image_w: float,
    image_h: float,
    contents: Sequence[Optional[str]] | None = None,
) -> LogicalTable:
    """Rebuild cell quads from text-line boxes via the separator lattice.

    Per column, the x extents of its single-column members are unified to
    [min-x, max-x]; rows likewise on y. The separator between two
    adjacent bands is the average of the facing extents; the outermost
    separators are the outer boundary of the extreme bands. Every cell
    quad is then the intersection rectangle of its row band and column
    band, so empty cells get geometry for free. A row or column whose
    every member is empty or spanning has no band and is an error.
    """
    if len(boxes) != len(structure.spans):
        raise AnnotationError(
            f"{len(boxes)} boxes for {len(structure.spans)} cells; "
            "mark empty cells with null entries"
        )
    rows, cols = structure.rows, structure.cols
    col_lo = np.full(cols, np.inf)
    col_hi = np.full(cols, -np.inf)
    row_lo = np.full(rows, np.inf)
    row_hi = np.full(rows, -np.inf)
    for (r0, r1, c0, c1), box in zip(structure.spans, boxes):
        if box is None:
            continue
        x1, y1, x2, y2 = _as_bbox(box)
        if c0 == c1:
            col_lo[c0] = min(col_lo[c0], x1)
            col_hi[c0] = max(col_hi[c0], x2)
        if r0 == r1:
            row_lo[r0] = min(row_lo[r0], y1)
            row_hi[r0] = max(row_hi[r0], y2)

    for c in range(cols):
        if not np.isfinite(col_lo[c]):
            raise AnnotationError(f"column {c} has no single-column text box; geometry undefined")
    for r in range(rows):
        if not np.isfinite(row_lo[r]):
            raise AnnotationError(f"row {r} has no single-row text box; geometry undefined")

    col_sep = np.empty(cols + 1)
    col_sep[0] = col_lo[0]
    col_sep[cols] = col_hi[cols - 1]
    col_sep[1:cols] = (col_hi[:-1] + col_lo[1:]) / 2.0
    row_sep = np.empty(rows + 1)
    row_sep[0] = row_lo[0]
    row_sep[rows] = row_hi[rows - 1]
    row_sep[1:rows] = (row_hi[:-1] + row_lo[1:]) / 2.0
    if np.any(np.diff(col_sep) <= 0):
        raise AnnotationError("column separators are not strictly increasing")
    if np.any(np.diff(row_sep) <= 0):
        raise AnnotationError("row separators are not strictly increasing")

    if contents is None:
        contents = structure.contents or (None,) * len(structure.spans)
    cells = []
    for (r0, r1, c0, c1), content in zip(structure.spans, contents):
        quad = _rect_quad(col_sep[c0], row_sep[r0], col_sep[c1 + 1], row_sep[r1 + 1])
        cells.append(Cell(r0, r1, c0, c1, quad=quad, content=content))
    table = LogicalTable(rows=rows, cols=cols, image_w=image_w, image_h=image_h, cells=tuple(cells))
    report = validate_logical_table(table)
    if not report.ok:
        raise AnnotationError(f"normalized table is invalid: {report.violations[0]}")
    return table


@dataclass(frozen=True)
class RawAnnotation:
    """One document's annotation before canonicalization.

    ``boxes`` has one entry per cell in td reading order (null marks an
    empty cell). The logical structure comes from ``html`` when present,
    otherwise from explicit ``spans``.
    """

    image_w: float
    image_h: float
    box_granularity: str = "cell_level"
    html: Optional[HtmlTokenStream] = None
    boxes: Optional[tuple] = None
    spans: Optional[tuple[tuple[int, int, int, int], ...]] = None
    contents: Optional[tuple[Optional[str], ...]] = None
    doc_id: Optional[str] = None

    def __post_init__(self):
        if self.box_granularity not in ("cell_level", "text_line_level"):
            raise AnnotationError(f"unknown box_granularity {self.box_granularity!r}")


def _structure_from_spans(spans: Sequence[Sequence[int]]) -> StructureGrid:
    tuples = tuple(tuple(int(v) for v in s) for s in spans)
    if not tuples:
        raise AnnotationError("empty span list")
    rows = 1 + max(s[1] for s in tuples)
    cols = 1 + max(s[3] for s in tuples)
    return StructureGrid(rows=rows, cols=cols, spans=tuples)


def ingest(raw: RawAnnotation) -> LogicalTable:
    """Canonicalize a raw annotation into a validated LogicalTable."""
    if raw.html is not None:
        structure = parse_html_structure(raw.html)
    elif raw.spans is not None:
        structure = _structure_from_spans(raw.spans)
    else:
        raise AnnotationError("annotation carries neither html tokens nor explicit spans")

    n_cells = len(structure.spans)
    boxes = raw.boxes if raw.boxes is not None else (None,) * n_cells
    if len(boxes) != n_cells:
        raise AnnotationError(f"{len(boxes)} boxes for {n_cells} cells; mark empty cells with null entries")
    contents = raw.contents
    if contents is None:
        contents = structure.contents or (None,) * n_cells
    if len(contents) != n_cells:
        raise AnnotationError(f"{len(contents)} content entries for {n_cells} cells")

    if raw.box_granularity == "text_line_level":
        return normalize_textline_boxes(structure, boxes, raw.image_w, raw.image_h, contents)

    cells = []
    for (r0, r1, c0, c1), box, content in zip(structure.spans, boxes, contents):
        quad = None
        if box is not None:
            arr = np.asarray(box, dtype=float)
            if arr.shape == (4, 2):
                quad = arr
            elif arr.shape == (4,):
                quad = _rect_quad(*arr)
            else:
                raise AnnotationError(f"cell box must be [x1,y1,x2,y2] or a quad, got shape {arr.shape}")
        cells.append(Cell(r0, r1, c0, c1, quad=quad, content=content))
    table = LogicalTable(
        rows=structure.rows, cols=structure.cols, image_w=raw.image_w, image_h=raw.image_h, cells=tuple(cells)
    )
    report = validate_logical_table(table)
    if not report.ok:
        raise AnnotationError(f"ingested table is invalid: {report.violations[0]}")
    return table


def raw_annotation_from_dict(doc: dict) -> RawAnnotation:
    """Decode one JSON-lines record; unknown fields are ignored."""
    try:
        image_w = float(doc["image_w"])
        image_h = float(doc["image_h"])
    except KeyError as exc:
        raise AnnotationError(f"annotation missing field {exc}") from exc
    html = doc.get("html")
    if isinstance(html, str):
        stream = HtmlTokenStream.from_html(html)
    elif html is not None:
        stream = HtmlTokenStream(tuple(html))
    else:
        stream = None
    boxes = doc.get("boxes")
    spans = doc.get("spans")
    contents = doc.get("contents")
    return RawAnnotation(
        image_w=image_w,
        image_h=image_h,
        box_granularity=doc.get("box_granularity", "cell_level"),
        html=stream,
        boxes=tuple(boxes) if boxes is not None else None,
        spans=tuple(tuple(s) for s in spans) if spans is not None else None,
        contents=tuple(contents) if contents is not None else None,
        doc_id=doc.get("doc_id"),
    )
