"""Ranking and level-set classification for bi-isotonic matrices from partial noisy observations."""

from .classify import BlockGrid, block_average, block_grid, classify_pipeline, classify_plugin
from .harness import ExperimentConfig, ResultRow, rate_fit, run_experiment
from .losses import (
    kendall_tau,
    loss_cph,
    loss_frobenius_perm,
    loss_l01na,
    loss_lph,
    loss_rph,
    rtilde_diag,
)
from .model import (
    BisoInstance,
    ClassificationMatrix,
    gen_multi_level,
    gen_noisy_sorting,
    gen_packing,
    gen_random_biso,
    gen_two_value,
    oracle_level_set,
)
from .sampling import ObservationSet, SamplingConfig, SubsampleStack, draw_observations, subsample
from .sohlob import (
    RankConfig,
    RankEstimate,
    SubsampleExhausted,
    ThresholdSpec,
    algo_constants,
    rank_pair,
    sohlob_rank,
)

__version__ = "0.1.0"
