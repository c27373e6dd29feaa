"""Level-set classification by block averaging on estimated orderings."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ClassificationMatrix
from .sampling import ObservationSet, child_rngs, make_rng, split_half
from .sohlob import RankConfig, ThresholdSpec, rank_pair


@dataclass(frozen=True)
class BlockGrid:
    """Regular tiling of sorted positions; the last block of each axis absorbs the remainder."""

    n: int
    d: int
    k_h: int
    l_h: int

    def __post_init__(self):
        if not (1 <= self.k_h <= self.n and 1 <= self.l_h <= self.d):
            raise ValueError("window sizes must lie between 1 and the matrix size")

    @property
    def row_blocks(self) -> int:
        return max(self.n // self.k_h, 1)

    @property
    def col_blocks(self) -> int:
        return max(self.d // self.l_h, 1)

    @property
    def n_blocks(self) -> int:
        return self.row_blocks * self.col_blocks

    def row_index(self) -> np.ndarray:
        """Block row of every sorted row position."""
        return np.minimum(np.arange(self.n) // self.k_h, self.row_blocks - 1)

    def col_index(self) -> np.ndarray:
        return np.minimum(np.arange(self.d) // self.l_h, self.col_blocks - 1)

    def blocks(self) -> list[tuple[range, range]]:
        rb = np.append(np.arange(self.row_blocks) * self.k_h, self.n)
        cb = np.append(np.arange(self.col_blocks) * self.l_h, self.d)
        return [(range(rb[r], rb[r + 1]), range(cb[s], cb[s + 1]))
                for r in range(self.row_blocks) for s in range(self.col_blocks)]


# marker for the constant-one estimator
DEGENERATE = None


def window_sizes(n, d, sigma, lambda0, h) -> tuple[int, int]:
    if h <= 0:
        raise ValueError("h must be positive")
    lg = math.log(n * d) if n * d > 1 else 0.0
    base = max(sigma, 1.0)
    k_h = math.ceil(base * math.sqrt(512.0 * lg * n / (d * lambda0 * h * h)))
    l_h = math.ceil(base * math.sqrt(512.0 * lg * d / (n * lambda0 * h * h)))
    return max(k_h, 1), max(l_h, 1)


def block_grid(n, d, sigma, lambda0, h) -> BlockGrid | None:
    """Grid with the noise-calibrated windows, or ``DEGENERATE`` when a window covers an axis."""
    k_h, l_h = window_sizes(n, d, sigma, lambda0, h)
    if k_h >= n or l_h >= d:
        return DEGENERATE
    return BlockGrid(n, d, k_h, l_h)


def block_average(obs: ObservationSet, pi_hat, eta_hat, grid: BlockGrid) -> np.ndarray:
    """Mean of observations per block after moving each one to its estimated sorted position."""
    pi_hat = np.asarray(pi_hat)
    eta_hat = np.asarray(eta_hat)
    rb = grid.row_index()[pi_hat[obs.rows]]
    cb = grid.col_index()[eta_hat[obs.cols]]
    flat = rb * grid.col_blocks + cb
    counts = np.bincount(flat, minlength=grid.n_blocks)
    sums = np.bincount(flat, weights=obs.values, minlength=grid.n_blocks)
    means = np.divide(sums, counts, out=np.zeros(grid.n_blocks), where=counts > 0)
    means = means.reshape(grid.row_blocks, grid.col_blocks)
    return means[grid.row_index()][:, grid.col_index()]


def classify_plugin(block_avg, p, pi_hat, eta_hat, h=0.0) -> ClassificationMatrix:
    """``1`` where the block average at the cell's estimated position reaches ``p``.

    ``block_avg`` is ``DEGENERATE`` for the constant-one estimator, in which
    case ``pi_hat`` and ``eta_hat`` only provide the shape.
    """
    pi_hat = np.asarray(pi_hat)
    eta_hat = np.asarray(eta_hat)
    if block_avg is DEGENERATE:
        return ClassificationMatrix(np.ones((pi_hat.size, eta_hat.size), dtype=np.int8), p, h)
    vals = np.asarray(block_avg)[pi_hat][:, eta_hat]
    return ClassificationMatrix((vals >= p).astype(np.int8), p, h)


def pipeline_threshold_vector(p, h) -> ThresholdSpec:
    """Thresholds and tolerances whose ranking losses control the classification error."""
    if not 0 < h <= 1:
        raise ValueError("h must lie in (0, 1]")
    pairs = []
    for s in range(1, math.ceil(math.log2(1.0 / h)) + 1):
        for t in (-1, 1):
            pairs.append((p + t * h * 2.0 ** (s - 2), h * 2.0 ** (s - 2)))
    for s in (2, 3):
        for t in (-1, 1):
            pairs.append((p + 3 * t * h * 2.0**-s, h * 2.0**-s))
    out = []
    for q, g in pairs:
        q = min(max(q, 0.0), 1.0)
        if (q, g) not in out:
            out.append((q, g))
    return ThresholdSpec(tuple(out))


@dataclass
class PipelineResult:
    estimate: ClassificationMatrix
    pi_hat: np.ndarray
    eta_hat: np.ndarray
    grid: BlockGrid | None
    rounds: int


def classify_pipeline(obs: ObservationSet, p, h, config: RankConfig, rng=None) -> PipelineResult:
    """Rank on one half of the sample, block-average the other half."""
    rng = make_rng(None) if rng is None else rng
    split_rng, rank_rng = child_rngs(rng, 2)
    first, second = split_half(obs, split_rng)
    n, d = obs.n, obs.d
    half = config.lambda0 / 2
    delta = 1.0 / (n * d) ** 2 if n * d > 1 else config.delta
    rank_cfg = RankConfig(half, config.sigma, delta, config.scale, "direct", config.k_star)
    rows, cols = rank_pair(first, pipeline_threshold_vector(p, h), rank_cfg, rank_rng)
    grid = block_grid(n, d, config.sigma, half, h)
    avg = DEGENERATE if grid is DEGENERATE else block_average(second, rows.pi_hat, cols.pi_hat, grid)
    est = classify_plugin(avg, p, rows.pi_hat, cols.pi_hat, h)
    return PipelineResult(est, rows.pi_hat, cols.pi_hat, grid, max(rows.rounds, cols.rounds))


def estimate_level_set(obs: ObservationSet, p, h, config: RankConfig, rng=None) -> ClassificationMatrix:
    return classify_pipeline(obs, p, h, config, rng).estimate


def two_value_reconstruction(estimate: ClassificationMatrix, h) -> np.ndarray:
    """``p - h + 2h R``: matrix estimate for a two-valued ``M``."""
    return estimate.p - h + 2 * h * estimate.cells.astype(np.float64)
