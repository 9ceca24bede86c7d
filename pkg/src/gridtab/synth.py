"""Seeded table generator and prediction-noise simulator.

Randomness contract: everything is a pure function of (seed, params).
Seeds are split with ``numpy.random.SeedSequence(seed).spawn`` into
independent streams for structure, layout, and distortion, so that two
runs with the same seed but different distortion parameters draw the same
logical structure (the property the distortion-invariance tests rely on).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import COORD_SENTINEL, Cell, GridLabel, GridPrediction, LogicalTable

__all__ = ["SynthParams", "NoiseParams", "generate_table", "perturb", "perfect_prediction"]

# Half-extent of the table box as a fraction of min(image_w, image_h); the
# rotated box then fits a circle of radius 0.32*sqrt(2) ~ 0.45 < 0.5.
_BOX_HALF_EXTENT = 0.32
# Headroom left for the sinusoidal warp given the box above.
_MAX_CURVE_AMP = 0.045


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the table generator; ranges are inclusive."""

    seed: int = 0
    rows: tuple[int, int] = (2, 8)
    cols: tuple[int, int] = (2, 8)
    merge_prob: float = 0.0
    image_w: float = 1024.0
    image_h: float = 1024.0
    jitter_px: float = 3.0
    rotation_deg: tuple[float, float] = (0.0, 0.0)
    curve_amp: float = 0.0

    def __post_init__(self):
        if self.rows[0] < 1 or self.rows[0] > self.rows[1]:
            raise ValueError(f"bad row range {self.rows}")
        if self.cols[0] < 1 or self.cols[0] > self.cols[1]:
            raise ValueError(f"bad col range {self.cols}")
        if not 0.0 <= self.merge_prob <= 1.0:
            raise ValueError("merge_prob must lie in [0, 1]")
        if not 0.0 <= self.curve_amp <= _MAX_CURVE_AMP:
            raise ValueError(f"curve_amp must lie in [0, {_MAX_CURVE_AMP}]")
        lo, hi = self.rotation_deg
        if lo > hi or lo < -30.0 or hi > 30.0:
            raise ValueError("rotation_deg must be a range within [-30, 30]")
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")


def _draw_partition(rng: np.random.Generator, rows: int, cols: int, merge_prob: float) -> list[list[int]]:
    """Rectangular partition of rows x cols, grown by random block merges.

    Each attempt draws a live cell and a direction; the merge happens
    when the neighbor has a compatible span (equal row span for a
    horizontal merge, equal column span for a vertical one). A merge
    that would leave an interior line with no cell corner anywhere is
    rejected: such a line would be invisible to the grid representation
    and the table could never round-trip.
    """
    spans: list[list[int] | None] = [[r, r, c, c] for r in range(rows) for c in range(cols)]
    owner = [[r * cols + c for c in range(cols)] for r in range(rows)]
    live = list(range(rows * cols))

    def line_kept(axis: int, line: int, skip_a: int, skip_b: int) -> bool:
        # axis 0: row line, axis 1: col line; outer lines always survive
        if line == 0 or line == (rows if axis == 0 else cols):
            return True
        lo, hi = (0, 1) if axis == 0 else (2, 3)
        for k in live:
            if k == skip_a or k == skip_b:
                continue
            span = spans[k]
            if span[lo] == line or span[hi] == line - 1:
                return True
        return False

    attempts = int(round(merge_prob * rows * cols))
    for _ in range(attempts):
        if len(live) < 2:
            break
        a = live[rng.integers(len(live))]
        horizontal = bool(rng.integers(2))
        r0, r1, c0, c1 = spans[a]
        if horizontal:
            if c1 + 1 >= cols:
                continue
            b = owner[r0][c1 + 1]
            sb = spans[b]
            if sb[0] != r0 or sb[1] != r1 or sb[2] != c1 + 1:
                continue
            # col line c1+1 loses its corners at r0 and r1+1
            if not line_kept(1, c1 + 1, a, b):
                continue
            merged = [r0, r1, c0, sb[3]]
        else:
            if r1 + 1 >= rows:
                continue
            b = owner[r1 + 1][c0]
            sb = spans[b]
            if sb[2] != c0 or sb[3] != c1 or sb[0] != r1 + 1:
                continue
            if not line_kept(0, r1 + 1, a, b):
                continue
            merged = [r0, sb[1], c0, c1]
        spans[a] = merged
        spans[b] = None
        live.remove(b)
        for r in range(merged[0], merged[1] + 1):
            row = owner[r]
            for c in range(merged[2], merged[3] + 1):
                row[c] = a
    return [spans[k] for k in live]


def generate_table(params: SynthParams) -> LogicalTable:
    """Draw a valid table: structure, jittered layout, then distortion.

    The quad corners of all cells come from one shared separator lattice,
    rotated about the image center and warped vertically by
    ``curve_amp * sin(pi * x)`` in normalized coordinates. Deterministic
    for a given params value.
    """
    ss = np.random.SeedSequence(params.seed)
    rng_structure, rng_layout, rng_distort = (np.random.default_rng(s) for s in ss.spawn(3))

    rows = int(rng_structure.integers(params.rows[0], params.rows[1] + 1))
    cols = int(rng_structure.integers(params.cols[0], params.cols[1] + 1))
    spans = _draw_partition(rng_structure, rows, cols, params.merge_prob)

    w, h = params.image_w, params.image_h
    half = _BOX_HALF_EXTENT * min(w, h)
    cx, cy = w / 2.0, h / 2.0
    xs = np.linspace(cx - half, cx + half, cols + 1)
    ys = np.linspace(cy - half, cy + half, rows + 1)
    jit_x = min(params.jitter_px, 0.3 * (2 * half) / cols)
    jit_y = min(params.jitter_px, 0.3 * (2 * half) / rows)
    # Draw both jitter vectors unconditionally to keep the stream aligned
    # across parameter variations.
    dx = rng_layout.uniform(-jit_x, jit_x, size=max(cols - 1, 0))
    dy = rng_layout.uniform(-jit_y, jit_y, size=max(rows - 1, 0))
    xs[1:-1] += dx
    ys[1:-1] += dy

    gx, gy = np.meshgrid(xs, ys)  # (rows+1, cols+1)
    theta = np.deg2rad(rng_distort.uniform(*params.rotation_deg))
    if theta != 0.0:
        rx = cx + (gx - cx) * np.cos(theta) - (gy - cy) * np.sin(theta)
        ry = cy + (gx - cx) * np.sin(theta) + (gy - cy) * np.cos(theta)
        gx, gy = rx, ry
    if params.curve_amp:
        gy = gy + params.curve_amp * h * np.sin(np.pi * gx / w)

    cells = []
    for r0, r1, c0, c1 in sorted(spans):
        quad = np.array(
            [
                [gx[r0, c0], gy[r0, c0]],
                [gx[r0, c1 + 1], gy[r0, c1 + 1]],
                [gx[r1 + 1, c1 + 1], gy[r1 + 1, c1 + 1]],
                [gx[r1 + 1, c0], gy[r1 + 1, c0]],
            ]
        )
        cells.append(Cell(r0, r1, c0, c1, quad=quad, content=f"r{r0}c{c0}"))
    return LogicalTable(rows=rows, cols=cols, image_w=w, image_h=h, cells=tuple(cells))


@dataclass(frozen=True)
class NoiseParams:
    """Noise model turning a label into a model-output-shaped prediction."""

    seed: int = 0
    coord_sigma: float = 0.0
    edge_flip_prob: float = 0.0
    line_prob_noise: float = 0.0
    confidence_floor: float = 0.02
    confidence_ceiling: float = 0.98

    def __post_init__(self):
        if not 0.0 <= self.confidence_floor < self.confidence_ceiling <= 1.0:
            raise ValueError("need 0 <= floor < ceiling <= 1")
        if not 0.0 <= self.edge_flip_prob <= 1.0:
            raise ValueError("edge_flip_prob must lie in [0, 1]")


def perfect_prediction(label: GridLabel) -> GridPrediction:
    """Render a label as an exact-confidence prediction (scores 1/0).

    Undefined coordinate slots become 0.0; reconstruction never reads
    them because the corresponding lines score 0.
    """
    defined = label.vertex_x != COORD_SENTINEL
    return GridPrediction(
        dims=label.dims,
        row_prob=label.row_positive.astype(float),
        col_prob=label.col_positive.astype(float),
        vertex_x=np.where(defined, label.vertex_x, 0.0),
        vertex_y=np.where(defined, label.vertex_y, 0.0),
        down_edge_prob=label.down_edge.astype(float),
        right_edge_prob=label.right_edge.astype(float),
        row_ref_pred=np.where(label.row_positive, label.row_ref_free, 0.0),
        col_ref_pred=np.where(label.col_positive, label.col_ref_free, 0.0),
        image_w=label.image_w,
        image_h=label.image_h,
    )


def perturb(label: GridLabel, noise: NoiseParams) -> GridPrediction:
    """Simulate model output: binary confidences plus configurable noise.

    Positive entries score ``confidence_ceiling`` and negative ones
    ``confidence_floor``; line probabilities get uniform perturbation of
    amplitude ``line_prob_noise``; defined vertex coordinates and the
    reference predictions get independent Gaussian jitter of std
    ``coord_sigma``; each edge inside the table extent flips across the
    floor/ceiling boundary with probability ``edge_flip_prob``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed))
    m, n = label.dims.m, label.dims.n
    lo, hi = noise.confidence_floor, noise.confidence_ceiling
    rows, cols = label.table_rows, label.table_cols

    def line_scores(positive: np.ndarray) -> np.ndarray:
        scores = np.where(positive, hi, lo)
        if noise.line_prob_noise:
            scores = scores + rng.uniform(-noise.line_prob_noise, noise.line_prob_noise, size=scores.shape)
        else:
            rng.uniform(-1, 1, size=scores.shape)  # keep stream aligned
        return np.clip(scores, 0.0, 1.0)

    row_prob = line_scores(label.row_positive)
    col_prob = line_scores(label.col_positive)

    defined = label.vertex_x != COORD_SENTINEL
    coord_noise = rng.normal(0.0, 1.0, size=(2, m, n)) * noise.coord_sigma
    vertex_x = np.where(defined, label.vertex_x + coord_noise[0], 0.0)
    vertex_y = np.where(defined, label.vertex_y + coord_noise[1], 0.0)

    down = np.where(label.down_edge, hi, lo)
    right = np.where(label.right_edge, hi, lo)
    flips = rng.uniform(size=(2, m, n)) < noise.edge_flip_prob
    in_down = np.zeros((m, n), dtype=bool)
    in_down[:rows, : cols + 1] = True
    in_right = np.zeros((m, n), dtype=bool)
    in_right[: rows + 1, :cols] = True
    down = np.where(flips[0] & in_down, lo + hi - down, down)
    right = np.where(flips[1] & in_right, lo + hi - right, right)

    ref_noise = rng.normal(0.0, 1.0, size=(2, max(m, n))) * noise.coord_sigma
    row_ref = np.where(label.row_positive, label.row_ref_free + ref_noise[0, :m], 0.0)
    col_ref = np.where(label.col_positive, label.col_ref_free + ref_noise[1, :n], 0.0)

    return GridPrediction(
        dims=label.dims,
        row_prob=row_prob,
        col_prob=col_prob,
        vertex_x=vertex_x,
        vertex_y=vertex_y,
        down_edge_prob=down,
        right_edge_prob=right,
        row_ref_pred=row_ref,
        col_ref_pred=col_ref,
        image_w=label.image_w,
        image_h=label.image_h,
    )
