"""Poissonized partial observations and their subsampling."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import BisoInstance


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def child_rngs(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    """Independent streams derived from ``rng``."""
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(k)]


@dataclass(frozen=True)
class SamplingConfig:
    lambda0: float
    sigma: float = 1.0
    noise: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.noise not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown noise {self.noise!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def effective_sigma(self) -> float:
        return 0.5 if self.noise == "bernoulli" else self.sigma


@dataclass(frozen=True)
class ObservationSet:
    """Structure-of-arrays sample ``(N', I, J, Y')`` on an ``n x d`` matrix."""

    n: int
    d: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if not rows.shape == cols.shape == values.shape or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n or cols.min() < 0 or cols.max() >= self.d):
            raise ValueError("observation index out of range")
        for name, arr in (("rows", rows), ("cols", cols), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def count(self) -> int:
        return int(self.rows.size)

    def transpose(self) -> "ObservationSet":
        return ObservationSet(self.d, self.n, self.cols, self.rows, self.values)

    def take(self, mask) -> "ObservationSet":
        return ObservationSet(self.n, self.d, self.rows[mask], self.cols[mask], self.values[mask])

    def counts(self) -> np.ndarray:
        return np.bincount(self.rows * self.d + self.cols, minlength=self.n * self.d).reshape(self.n, self.d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "i", "j", "y"])
        for t, (i, j, y) in enumerate(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist())):
            writer.writerow([t, i, j, repr(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, d: int) -> "ObservationSet":
        reader = csv.DictReader(io.StringIO(text))
        rows, cols, values = [], [], []
        for rec in reader:
            rows.append(int(rec["i"]))
            cols.append(int(rec["j"]))
            values.append(float(rec["y"]))
        return cls(n, d, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(values))


def draw_observations(instance: BisoInstance, config: SamplingConfig, rng=None) -> ObservationSet:
    """Sample ``N' ~ Poisson(lambda0 n d)`` uniformly placed noisy entries."""
    rng = make_rng(config.seed) if rng is None else rng
    n, d = instance.n, instance.d
    if config.lambda0 > math.log(max(n * d, 2)):
        warnings.warn("lambda0 exceeds log(nd); the estimator is tuned for sparser sampling", stacklevel=2)
    count = int(rng.poisson(config.lambda0 * n * d))
    rows = rng.integers(0, n, size=count)
    cols = rng.integers(0, d, size=count)
    mean = instance.M[rows, cols]
    if config.noise == "bernoulli":
        values = (rng.random(count) < mean).astype(np.float64)
    else:
        values = mean + config.sigma * rng.standard_normal(count)
    return ObservationSet(n, d, rows, cols, values)


def split_half(obs: ObservationSet, rng: np.random.Generator) -> tuple[ObservationSet, ObservationSet]:
    """Independent fair-coin thinning into two samples of half intensity."""
    mask = rng.random(obs.count) < 0.5
    return obs.take(mask), obs.take(~mask)


def default_k_star(n: int, d: int) -> int:
    return 3 * max(1, math.ceil(math.log2(max(n, d))))


@dataclass(frozen=True)
class SubsampleStack:
    """``k_star`` per-entry count and mean matrices; unobserved means are 0."""

    counts: np.ndarray  # (k_star, n, d) int
    means: np.ndarray  # (k_star, n, d) float
    lambda0: float

    @property
    def k_star(self) -> int:
        return self.counts.shape[0]

    @property
    def lambda_minus(self) -> float:
        return self.lambda0 / self.k_star

    @property
    def lambda1(self) -> float:
        return -math.expm1(-self.lambda_minus)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape[1], self.counts.shape[2]


def subsample(obs: ObservationSet, lambda0: float, k_star: int | None = None, rng=None) -> SubsampleStack:
    """Assign each observation to one of ``k_star`` subsamples uniformly at random."""
    n, d = obs.n, obs.d
    k_star = default_k_star(n, d) if k_star is None else k_star
    if k_star < 1:
        raise ValueError("k_star must be at least 1")
    rng = make_rng(None) if rng is None else rng
    u = rng.integers(0, k_star, size=obs.count)
    flat = (u * n + obs.rows) * d + obs.cols
    size = k_star * n * d
    counts = np.bincount(flat, minlength=size)
    sums = np.bincount(flat, weights=obs.values, minlength=size)
    means = np.divide(sums, counts, out=np.zeros(size), where=counts > 0)
    return SubsampleStack(counts.reshape(k_star, n, d), means.reshape(k_star, n, d), lambda0)
