import numpy as np
import pytest

from gridtab import Cell, GridDims, LogicalTable

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    """Collect one pass/fail line per acceptance criterion for the summary."""
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rect_quad(x1, y1, x2, y2):
    return np.array([[x1, y1], [x2, y1], [x2, y2], [x1, y2]], dtype=float)


def table_from_spans(spans, rows, cols, image_w=100.0, image_h=100.0, contents=None):
    """Axis-aligned table with evenly spaced separators for the given spans."""
    xs = np.linspace(0.0, image_w, cols + 1)
    ys = np.linspace(0.0, image_h, rows + 1)
    cells = []
    for k, (r0, r1, c0, c1) in enumerate(spans):
        quad = rect_quad(xs[c0], ys[r0], xs[c1 + 1], ys[r1 + 1])
        content = contents[k] if contents is not None else None
        cells.append(Cell(r0, r1, c0, c1, quad=quad, content=content))
    return LogicalTable(rows=rows, cols=cols, image_w=image_w, image_h=image_h, cells=tuple(cells))


@pytest.fixture
def full_2x2():
    return table_from_spans(
        [(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 1, 1)], rows=2, cols=2
    )


@pytest.fixture
def merged_top_2x2():
    # one cell spanning both columns of row 0, two unit cells below
    return table_from_spans([(0, 0, 0, 1), (1, 1, 0, 0), (1, 1, 1, 1)], rows=2, cols=2)


@pytest.fixture
def single_cell():
    return table_from_spans([(0, 0, 0, 0)], rows=1, cols=1)


@pytest.fixture
def dims_50():
    return GridDims(50, 50)
