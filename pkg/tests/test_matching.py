import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtab import (
    LossWeights,
    build_grid_label,
    cell_bounding_rectangles,
    evaluate_losses,
    focal_loss,
    generate_table,
    giou,
    giou_loss,
    hungarian,
    matching_cost,
    total_loss,
)
from gridtab.matching import coord_loss
from gridtab.synth import NoiseParams, SynthParams, perfect_prediction, perturb

from oracles import brute_force_assignment


class TestHungarian:
    def test_identity_on_zero_diagonal(self):
        cost = np.ones((3, 3)) - np.eye(3)
        result = hungarian(cost)
        assert result.pairs == ((0, 0), (1, 1), (2, 2))
        assert result.total_cost == 0.0

    def test_two_by_two(self):
        result = hungarian(np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert result.pairs == ((0, 0), (1, 1))
        assert result.total_cost == 2.0

    def test_matches_bruteforce_on_random_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            r, c = rng.integers(1, 7, size=2)
            cost = rng.normal(size=(r, c)) * rng.uniform(0.1, 10)
            assert hungarian(cost).total_cost == pytest.approx(brute_force_assignment(cost), abs=1e-9)

    def test_rectangular_assigns_min_dim_pairs(self):
        result = hungarian(np.zeros((2, 5)))
        assert len(result.pairs) == 2

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            hungarian(np.zeros((0, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            hungarian(np.array([[np.inf, 1.0], [1.0, 0.0]]))


class TestMatchingCost:
    def test_perfect_slot_costs_zero(self):
        cost = matching_cost(np.array([1.0]), np.array([0.3]), np.array([0.3]))
        assert cost[0, 0] == 0.0

    def test_half_prob_and_offset(self):
        cost = matching_cost(np.array([0.5]), np.array([0.3]), np.array([0.4]))
        assert cost[0, 0] == pytest.approx(0.6)

    def test_assignment_recovers_canonical_order(self, dims_50):
        table = generate_table(SynthParams(seed=11, rows=(3, 6), cols=(3, 6), merge_prob=0.3))
        label = build_grid_label(table, dims_50)
        pred = perfect_prediction(label)
        gt_refs = label.row_ref_free[label.row_positive]
        assignment = hungarian(matching_cost(pred.row_prob, pred.row_ref_pred, gt_refs))
        assert all(slot == line for slot, line in assignment.pairs)

    def test_permutation_invariance(self, dims_50):
        # shuffling prediction slots must leave the recovered pairing equivalent
        table = generate_table(SynthParams(seed=13, rows=(4, 7), cols=(4, 7)))
        label = build_grid_label(table, dims_50)
        pred = perfect_prediction(label)
        gt_refs = label.row_ref_free[label.row_positive]
        rng = np.random.default_rng(0)
        perm = rng.permutation(50)
        cost = matching_cost(pred.row_prob[perm], pred.row_ref_pred[perm], gt_refs)
        pairs = hungarian(cost).pairs
        assert all(perm[slot] == line for slot, line in pairs)


class TestFocalLoss:
    def test_perfect_prediction_is_zero(self):
        assert focal_loss(np.array([1.0]), np.array([1.0])) == pytest.approx(0.0, abs=1e-5)

    def test_gamma_zero_halves_bce(self):
        rng = np.random.default_rng(3)
        p = rng.uniform(0.05, 0.95, size=50)
        t = (rng.uniform(size=50) > 0.5).astype(float)
        bce = -np.mean(t * np.log(p) + (1 - t) * np.log(1 - p))
        assert focal_loss(p, t, alpha=0.5, gamma=0.0) == pytest.approx(0.5 * bce, rel=1e-9)

    def test_reference_value(self):
        expected = 0.25 * 0.25 * math.log(2)
        assert focal_loss(np.array([0.5]), np.array([1.0]), alpha=0.25, gamma=2.0) == pytest.approx(
            expected, abs=1e-9
        )

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            focal_loss(np.zeros(3), np.zeros(4))

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative(self, p, q):
        assert focal_loss(np.array([p, q]), np.array([1.0, 0.0])) >= 0.0

    def test_monotone_decreasing_in_true_class_probability(self):
        ps = np.linspace(0.01, 0.99, 60)
        losses = [focal_loss(np.array([p]), np.array([1.0])) for p in ps]
        assert all(a > b for a, b in zip(losses, losses[1:]))


class TestGiou:
    def test_identical_boxes(self):
        box = np.array([0.1, 0.2, 0.5, 0.9])
        assert giou(box, box) == 1.0
        assert giou_loss(box, box) == 0.0

    def test_disjoint_reference_value(self):
        value = giou([0, 0, 1, 1], [2, 2, 3, 3])
        assert value == pytest.approx(-7.0 / 9.0, abs=1e-12)

    def test_contained_box_equals_iou(self):
        outer = [0.0, 0.0, 4.0, 4.0]
        inner = [1.0, 1.0, 2.0, 2.0]
        assert giou(outer, inner) == pytest.approx(1.0 / 16.0)

    def test_degenerate_box(self):
        assert giou([0, 0, 0, 0], [1, 1, 2, 2]) <= 0.0

    def test_invalid_box_rejected(self):
        with pytest.raises(ValueError):
            giou([1, 0, 0, 1], [0, 0, 1, 1])

    @given(
        st.tuples(*[st.floats(-5, 5) for _ in range(4)]),
        st.tuples(*[st.floats(-5, 5) for _ in range(4)]),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry_and_bounds(self, a, b):
        def as_box(t):
            x1, y1, x2, y2 = min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])
            return np.array([x1, y1, max(x2, x1 + 0.01), max(y2, y1 + 0.01)])

        box_a, box_b = as_box(a), as_box(b)
        g1, g2 = giou(box_a, box_b), giou(box_b, box_a)
        assert g1 == pytest.approx(g2, abs=1e-12)
        assert -1.0 < g1 <= 1.0

    def test_two_degenerate_boxes_reach_closed_bound(self):
        # zero-area boxes are defined (IoU 0) and may touch -1 exactly
        assert giou([0, 0, 0, 1], [1, 0, 1, 1]) >= -1.0


class TestCellRectangles:
    def test_axis_aligned_equals_quad(self, full_2x2, dims_50):
        label = build_grid_label(full_2x2, dims_50)
        rects = cell_bounding_rectangles(label.vertex_x, label.vertex_y, full_2x2.cells, label.vertex_positive)
        assert np.allclose(rects[0], [0.0, 0.0, 0.5, 0.5])
        assert rects.shape == (4, 4)

    def test_rotated_corners_bounding_box(self):
        vx = np.array([[0.1, 0.3], [0.1, 0.3]])
        vy = np.array([[0.1, 0.12], [0.28, 0.3]])
        from gridtab import Cell

        rects = cell_bounding_rectangles(vx, vy, [Cell(0, 0, 0, 0)])
        assert np.allclose(rects[0], [0.1, 0.1, 0.3, 0.3])

    def test_cell_count_matches_table(self, dims_50):
        for seed in range(10):
            table = generate_table(SynthParams(seed=seed, rows=(2, 6), cols=(2, 6), merge_prob=0.4))
            label = build_grid_label(table, dims_50)
            rects = cell_bounding_rectangles(label.vertex_x, label.vertex_y, table.cells)
            assert len(rects) == len(table.cells)

    def test_negative_corner_rejected(self, merged_top_2x2, dims_50):
        from gridtab import Cell

        label = build_grid_label(merged_top_2x2, dims_50)
        with pytest.raises(ValueError, match="negative vertex"):
            cell_bounding_rectangles(
                label.vertex_x, label.vertex_y, [Cell(0, 0, 0, 0)], label.vertex_positive
            )


class TestTotalLoss:
    def test_zero_components(self):
        assert total_loss(0.0, 0.0, 0.0, 0.0) == 0.0

    def test_unit_components_with_default_weights(self):
        assert total_loss(1.0, 1.0, 1.0, 1.0) == 16.0

    def test_linear_in_each_component(self):
        base = total_loss(1.0, 2.0, 3.0, 4.0)
        assert total_loss(2.0, 2.0, 3.0, 4.0) - base == pytest.approx(1.0)  # lambda_cls
        assert total_loss(1.0, 3.0, 3.0, 4.0) - base == pytest.approx(5.0)
        assert total_loss(1.0, 2.0, 4.0, 4.0) - base == pytest.approx(5.0)
        assert total_loss(1.0, 2.0, 3.0, 5.0) - base == pytest.approx(5.0)

    def test_coord_loss_composition(self):
        assert coord_loss(0.2, 0.3, 1.0, gamma_iou=0.1) == pytest.approx(0.6)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_cls=-1.0)


class TestEvaluateLosses:
    def test_perfect_prediction_scores_zero_everywhere(self, dims_50):
        table = generate_table(SynthParams(seed=21, rows=(2, 6), cols=(2, 6), merge_prob=0.4))
        label = build_grid_label(table, dims_50)
        terms = evaluate_losses(perfect_prediction(label), label)
        for key in ("cls", "l1_row", "l1_col", "iou", "coord", "ref", "edge", "total"):
            assert terms[key] == pytest.approx(0.0, abs=1e-6), key

    def test_noise_increases_total(self, dims_50):
        table = generate_table(SynthParams(seed=22, rows=(3, 6), cols=(3, 6)))
        label = build_grid_label(table, dims_50)
        clean = evaluate_losses(perturb(label, NoiseParams(seed=1)), label)
        noisy = evaluate_losses(perturb(label, NoiseParams(seed=1, coord_sigma=0.02)), label)
        assert noisy["total"] > clean["total"]
        assert noisy["coord"] > clean["coord"]

    def test_slot_permutation_does_not_change_losses(self, dims_50):
        from gridtab.grid import GridPrediction

        table = generate_table(SynthParams(seed=23, rows=(3, 5), cols=(3, 5)))
        label = build_grid_label(table, dims_50)
        pred = perfect_prediction(label)
        rng = np.random.default_rng(5)
        rp = rng.permutation(50)
        cp = rng.permutation(50)
        shuffled = GridPrediction(
            dims=pred.dims,
            row_prob=pred.row_prob[rp],
            col_prob=pred.col_prob[cp],
            vertex_x=pred.vertex_x[np.ix_(rp, cp)],
            vertex_y=pred.vertex_y[np.ix_(rp, cp)],
            down_edge_prob=pred.down_edge_prob[np.ix_(rp, cp)],
            right_edge_prob=pred.right_edge_prob[np.ix_(rp, cp)],
            row_ref_pred=pred.row_ref_pred[rp],
            col_ref_pred=pred.col_ref_pred[cp],
            image_w=pred.image_w,
            image_h=pred.image_h,
        )
        terms = evaluate_losses(shuffled, label)
        assert terms["total"] == pytest.approx(0.0, abs=1e-6)
