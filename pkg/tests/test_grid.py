import numpy as np
import pytest

from gridtab import (
    Cell,
    GridDims,
    LogicalTable,
    build_grid_label,
    generate_table,
    grid_stats,
    incident_positive_edges,
    validate_logical_table,
)
from gridtab.grid import quad_signed_area
from gridtab.synth import SynthParams

from conftest import rect_quad, table_from_spans


class TestGridDims:
    def test_minimum_size(self):
        with pytest.raises(ValueError):
            GridDims(1, 5)
        with pytest.raises(ValueError):
            GridDims(5, 1)

    def test_fits(self):
        dims = GridDims(5, 4)
        assert dims.fits(4, 3)
        assert not dims.fits(5, 3)
        assert not dims.fits(4, 4)


class TestValidate:
    def test_full_2x2_is_valid(self, full_2x2):
        assert validate_logical_table(full_2x2).ok

    def test_missing_cell_reports_gap(self):
        table = table_from_spans([(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0)], rows=2, cols=2)
        report = validate_logical_table(table)
        assert report.violations == ("gap at (1, 1)",)

    def test_duplicate_cell_reports_overlap(self, full_2x2):
        extra = full_2x2.cells + (Cell(0, 0, 0, 0, quad=rect_quad(0, 0, 50, 50)),)
        table = LogicalTable(2, 2, 100.0, 100.0, extra)
        report = validate_logical_table(table)
        assert "overlap at (0, 0)" in report.violations

    def test_out_of_range_span(self):
        table = LogicalTable(2, 2, 100.0, 100.0, (Cell(0, 2, 0, 1),))
        report = validate_logical_table(table)
        assert any("out of range" in v for v in report.violations)

    def test_degenerate_quad_flagged(self):
        bad = rect_quad(0, 0, 50, 100)[::-1].copy()  # counter-clockwise
        cells = (Cell(0, 0, 0, 0, quad=bad), Cell(0, 0, 1, 1, quad=rect_quad(50, 0, 100, 100)))
        report = validate_logical_table(LogicalTable(1, 2, 100.0, 100.0, cells))
        assert any("non-positive area" in v for v in report.violations)

    def test_quad_signed_area_sign(self):
        assert quad_signed_area(rect_quad(0, 0, 2, 3)) == pytest.approx(6.0)
        assert quad_signed_area(rect_quad(0, 0, 2, 3)[::-1]) == pytest.approx(-6.0)


class TestIncidentEdges:
    def test_single_cell_corner(self, single_cell, dims_50):
        label = build_grid_label(single_cell, dims_50)
        assert incident_positive_edges(label, i=0, j=0) == 2

    def test_full_2x2_center(self, full_2x2, dims_50):
        label = build_grid_label(full_2x2, dims_50)
        assert incident_positive_edges(label, i=1, j=1) == 4

    def test_merged_top_border_point_is_collinear(self, merged_top_2x2, dims_50):
        label = build_grid_label(merged_top_2x2, dims_50)
        assert incident_positive_edges(label, i=0, j=1) == 2
        # and those two edges are the collinear top-border ones
        assert label.right_edge[0, 0] and label.right_edge[0, 1]
        assert not label.down_edge[0, 1]

    def test_out_of_range(self, single_cell, dims_50):
        label = build_grid_label(single_cell, dims_50)
        with pytest.raises(IndexError):
            incident_positive_edges(label, i=50, j=0)

    def test_array_form_matches_label_form(self, merged_top_2x2, dims_50):
        label = build_grid_label(merged_top_2x2, dims_50)
        for i in range(4):
            for j in range(4):
                direct = incident_positive_edges(label.down_edge, label.right_edge, i, j)
                assert direct == incident_positive_edges(label, i=i, j=j)


class TestGridStats:
    def test_single_cell(self, single_cell, dims_50):
        stats = grid_stats(build_grid_label(single_cell, dims_50))
        assert (stats.positive_rows, stats.positive_cols) == (2, 2)
        assert (stats.positive_vertexes, stats.positive_edges) == (4, 4)

    def test_full_2x2(self, full_2x2, dims_50):
        stats = grid_stats(build_grid_label(full_2x2, dims_50))
        assert (stats.positive_rows, stats.positive_cols) == (3, 3)
        assert (stats.positive_vertexes, stats.positive_edges) == (9, 12)

    def test_merged_top(self, merged_top_2x2, dims_50):
        stats = grid_stats(build_grid_label(merged_top_2x2, dims_50))
        assert (stats.positive_rows, stats.positive_cols) == (3, 3)
        assert (stats.positive_vertexes, stats.positive_edges) == (8, 11)

    def test_counts_equal_bruteforce_enumeration(self, dims_50):
        for seed in range(20):
            table = generate_table(SynthParams(seed=seed, rows=(1, 8), cols=(1, 8), merge_prob=0.4))
            label = build_grid_label(table, dims_50)
            stats = grid_stats(label)
            m, n = label.dims.m, label.dims.n
            assert stats.positive_rows == sum(bool(label.row_positive[i]) for i in range(m))
            assert stats.positive_vertexes == sum(
                bool(label.vertex_positive[i, j]) for i in range(m) for j in range(n)
            )
            edges = sum(bool(label.down_edge[i, j]) + bool(label.right_edge[i, j])
                        for i in range(m) for j in range(n))
            assert stats.positive_edges == edges


@pytest.fixture(scope="module")
def labels():
    dims = GridDims(30, 30)
    out = []
    for seed in range(40):
        table = generate_table(
            SynthParams(seed=seed, rows=(1, 10), cols=(1, 10), merge_prob=0.5,
                        rotation_deg=(-20, 20), curve_amp=0.02)
        )
        out.append((table, build_grid_label(table, dims)))
    return out


class TestLatticeInvariants:
    """Structural facts the reconstruction rule relies on."""

    def test_positive_edges_stay_on_positive_lines(self, labels):
        for _, label in labels:
            di, dj = np.nonzero(label.down_edge)
            assert label.row_positive[di].all() and label.row_positive[di + 1].all()
            assert label.col_positive[dj].all()
            ri, rj = np.nonzero(label.right_edge)
            assert label.row_positive[ri].all()
            assert label.col_positive[rj].all() and label.col_positive[rj + 1].all()

    def test_every_positive_vertex_has_two_or_more_edges(self, labels):
        for _, label in labels:
            for i, j in zip(*np.nonzero(label.vertex_positive)):
                assert incident_positive_edges(label, i=int(i), j=int(j)) >= 2

    def test_interior_corners_are_junctions_extremes_are_not(self, labels):
        for table, label in labels:
            extremes = {(0, 0), (0, table.cols), (table.rows, 0), (table.rows, table.cols)}
            for i, j in zip(*np.nonzero(label.vertex_positive)):
                count = incident_positive_edges(label, i=int(i), j=int(j))
                if (int(i), int(j)) in extremes:
                    assert count == 2
                else:
                    assert count >= 3

    def test_padding_is_all_negative(self, labels):
        for table, label in labels:
            R, C = table.rows, table.cols
            assert not label.row_positive[R + 1 :].any()
            assert not label.col_positive[C + 1 :].any()
            assert not label.vertex_positive[R + 1 :, :].any()
            assert not label.vertex_positive[:, C + 1 :].any()
            assert not label.down_edge[R + 1 :, :].any() and not label.down_edge[:, C + 1 :].any()
            assert not label.right_edge[R + 1 :, :].any() and not label.right_edge[:, C + 1 :].any()
            assert (label.vertex_x[R + 1 :, :] == -1).all()
            assert (label.vertex_x[:, C + 1 :] == -1).all()
