"""Ground-truth bi-isotonic matrices, permutations and level sets.

Conventions used throughout the package:

* indices are 0-based; a permutation ``perm`` of ``[n]`` is an integer array
  with ``perm[i]`` the position of item ``i`` (position 0 is the "best" row,
  i.e. the one with the largest entries);
* ``M[inverse(pi)][:, inverse(eta)]`` is bi-isotonic, that is non-increasing
  down every column and along every row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODELS = ("TwoValue", "MultiLevel", "NoisySorting", "NoisySortingGeneral", "Packing", "RandomBiso")

# ternary cell codes for ClassificationMatrix
NA = -1


def check_permutation(perm, n=None) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.ndim != 1 or not np.issubdtype(perm.dtype, np.integer):
        raise ValueError("a permutation must be a 1-d integer array")
    if n is not None and perm.size != n:
        raise ValueError(f"permutation has length {perm.size}, expected {n}")
    if not np.array_equal(np.sort(perm), np.arange(perm.size)):
        raise ValueError("not a permutation of 0..n-1")
    return perm.astype(np.int64, copy=False)


def inverse(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=perm.dtype)
    return inv


def identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def reversed_perm(perm) -> np.ndarray:
    """Return ``pi^-`` with ``pi^-(i) = n - 1 - pi(i)``."""
    perm = np.asarray(perm)
    return perm.size - 1 - perm


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n).astype(np.int64)


def sort_matrix(M, row_perm, col_perm) -> np.ndarray:
    """Reorder ``M`` so that row ``a`` holds item ``row_perm^-1(a)``."""
    return np.asarray(M)[inverse(row_perm)][:, inverse(col_perm)]


def unsort_matrix(S, row_perm, col_perm) -> np.ndarray:
    """Inverse of :func:`sort_matrix`: ``M[i, j] = S[row_perm[i], col_perm[j]]``."""
    return np.asarray(S)[np.asarray(row_perm)][:, np.asarray(col_perm)]


def is_biisotonic(S) -> bool:
    """O(nd) scan of an already sorted matrix."""
    S = np.asarray(S)
    return bool(np.all(S[:-1, :] >= S[1:, :]) and np.all(S[:, :-1] >= S[:, 1:]))


@dataclass(frozen=True)
class BisoInstance:
    M: np.ndarray
    row_perm: np.ndarray
    col_perm: np.ndarray
    model: str = "RandomBiso"
    p: float = float("nan")
    h: float = float("nan")

    def __post_init__(self):
        M = np.array(self.M, dtype=np.float64)
        if M.ndim != 2:
            raise ValueError("M must be a matrix")
        if self.model not in MODELS:
            raise ValueError(f"unknown model tag {self.model!r}")
        n, d = M.shape
        object.__setattr__(self, "row_perm", check_permutation(self.row_perm, n).copy())
        object.__setattr__(self, "col_perm", check_permutation(self.col_perm, d).copy())
        M.setflags(write=False)
        self.row_perm.setflags(write=False)
        self.col_perm.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]

    def sorted(self) -> np.ndarray:
        return sort_matrix(self.M, self.row_perm, self.col_perm)

    def validate(self) -> None:
        if np.any(self.M < 0) or np.any(self.M > 1):
            raise ValueError("entries must lie in [0, 1]")
        if not is_biisotonic(self.sorted()):
            raise ValueError("matrix is not bi-isotonic under its permutations")
        if self.model.startswith("NoisySorting") and not np.allclose(self.M + self.M.T, 1.0):
            raise ValueError("noisy sorting matrix is not skew symmetric")

    def transpose(self) -> "BisoInstance":
        return BisoInstance(self.M.T, self.col_perm, self.row_perm, self.model, self.p, self.h)


@dataclass(frozen=True)
class ClassificationMatrix:
    """Ternary matrix over {0, 1, NA}; NA is stored as -1."""

    cells: np.ndarray
    p: float
    h: float = field(default=0.0)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8)
        if cells.ndim != 2 or not np.all(np.isin(cells, (NA, 0, 1))):
            raise ValueError("cells must be a matrix over {0, 1, NA}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def shape(self):
        return self.cells.shape

    def to_text(self) -> str:
        chars = np.array(["N", "0", "1"])[self.cells + 1]
        return "\n".join("".join(row) for row in chars) + "\n"

    @classmethod
    def from_text(cls, text: str, p: float, h: float = 0.0) -> "ClassificationMatrix":
        lookup = {"N": NA, "0": 0, "1": 1}
        rows = [[lookup[c] for c in line.strip()] for line in text.splitlines() if line.strip()]
        return cls(np.array(rows, dtype=np.int8), p, h)


def level_set(M, p: float, h: float) -> np.ndarray:
    M = np.asarray(M)
    out = np.full(M.shape, NA, dtype=np.int8)
    out[M <= p - h] = 0
    out[M >= p + h] = 1
    return out


def oracle_level_set(instance: BisoInstance, p: float, h: float) -> ClassificationMatrix:
    """Classification matrix of the true ``M``: 1 above ``p+h``, 0 below ``p-h``."""
    if h < 0:
        raise ValueError("tolerance h must be nonnegative")
    return ClassificationMatrix(level_set(instance.M, p, h), p, h)


# ---------------------------------------------------------------- generators


def _check_staircase(cut, n, d) -> np.ndarray:
    cut = np.asarray(cut)
    if cut.shape != (d,):
        raise ValueError(f"boundary must have one entry per column ({d})")
    if np.any(cut < 0) or np.any(cut > n):
        raise ValueError("boundary entries must lie in 0..n")
    if np.any(np.diff(cut) > 0):
        raise ValueError("boundary must be non-increasing")
    return cut.astype(np.int64)


def random_staircase(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Non-increasing cut vector with entries uniform in 0..n."""
    return np.sort(rng.integers(0, n + 1, size=d))[::-1].copy()


def staircase_matrix(cut, n: int, low: float, high: float) -> np.ndarray:
    cut = np.asarray(cut)
    return np.where(np.arange(n)[:, None] < cut[None, :], high, low)


def gen_two_value(n, d, p, h, row_perm=None, col_perm=None, boundary=None, rng=None) -> BisoInstance:
    """Matrix with values ``p+h`` above a staircase and ``p-h`` below it.

    ``boundary[j]`` is the number of leading rows (in oracle order) of column
    ``j`` that take the high value. Missing pieces are drawn from ``rng``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if boundary is None:
        boundary = random_staircase(n, d, rng)
    cut = _check_staircase(boundary, n, d)
    row_perm = random_permutation(n, rng) if row_perm is None else row_perm
    col_perm = random_permutation(d, rng) if col_perm is None else col_perm
    S = staircase_matrix(cut, n, p - h, p + h)
    return BisoInstance(unsort_matrix(S, row_perm, col_perm), row_perm, col_perm, "TwoValue", p, h)


def gen_noisy_sorting(n, h, generalized=False, rng=None, perm=None) -> BisoInstance:
    """Tournament matrix: ``M[i, j] >= 1/2 + h`` whenever ``i`` is ranked above ``j``.

    The column permutation of the instance is the reversal of the row
    permutation, which is what makes the tournament matrix bi-isotonic.
    """
    if n < 2:
        raise ValueError("noisy sorting needs n >= 2")
    if not 0 < h < 0.5:
        raise ValueError("h must lie in (0, 1/2)")
    rng = rng if rng is not None else np.random.default_rng()
    perm = random_permutation(n, rng) if perm is None else check_permutation(perm, n)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    if generalized:
        raw = np.where(upper, rng.random((n, n)), -np.inf)
        # non-decreasing to the right, then non-increasing downwards
        raw = np.maximum.accumulate(raw, axis=1)
        raw = np.maximum.accumulate(raw[::-1], axis=0)[::-1]
        U = 0.5 + h + (0.5 - h) * np.where(upper, raw, 0.0)
    else:
        U = np.full((n, n), 0.5 + h)
    # S[a, b]: player at position a against player at position b
    S = np.where(upper, U, 0.0)
    S = S + np.where(upper.T, 1.0 - S.T, 0.0)
    np.fill_diagonal(S, 0.5)
    M = unsort_matrix(S, perm, perm)
    model = "NoisySortingGeneral" if generalized else "NoisySorting"
    return BisoInstance(M, perm, reversed_perm(perm), model, 0.5, h)


def gen_packing(n, d, p, h, l, v) -> BisoInstance:
    """Lower-bound packing matrix: ``p+h`` on rows with ``v_i = 1`` and columns ``j < l``."""
    v = np.asarray(v)
    if v.shape != (n,) or not np.all(np.isin(v, (0, 1))):
        raise ValueError("v must be a binary vector of length n")
    if n % 2 or int(v.sum()) != n // 2:
        raise ValueError("v must be balanced: n even and sum(v) = n/2")
    if not 1 <= l <= d:
        raise ValueError("l must satisfy 1 <= l <= d")
    M = np.where((v[:, None] == 1) & (np.arange(d)[None, :] < l), p + h, p - h)
    # ones first, each group in index order
    order = np.concatenate([np.flatnonzero(v == 1), np.flatnonzero(v == 0)])
    return BisoInstance(M, inverse(order), identity(d), "Packing", p, h)


def packing_width(sigma, lambda0, h, d) -> int:
    """Column count ``floor(0.16 sigma^2 / (lambda0 h^2))`` capped at ``d``."""
    # relative slack so that e.g. 0.16 / 0.1**2 floors to 16
    return int(min(math.floor(0.16 * sigma**2 / (lambda0 * h**2) * (1 + 1e-12)), d))


def gen_multi_level(n, d, values, rng=None) -> BisoInstance:
    """K-valued matrix built from nested random staircases."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need at least two levels")
    if np.any(np.diff(values) <= 0):
        raise ValueError("values must be strictly increasing")
    if values[0] < 0 or values[-1] > 1:
        raise ValueError("values must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng()
    cuts = np.sort(np.stack([random_staircase(n, d, rng) for _ in range(values.size - 1)]), axis=0)
    # level of cell (a, c) = number of staircases covering it
    level = (np.arange(n)[None, :, None] < cuts[:, None, :]).sum(axis=0)
    S = values[level]
    row_perm, col_perm = random_permutation(n, rng), random_permutation(d, rng)
    return BisoInstance(unsort_matrix(S, row_perm, col_perm), row_perm, col_perm, "MultiLevel")


def monotone_rearrangement(A) -> np.ndarray:
    """Sort rows then columns in decreasing order until both are sorted."""
    S = np.array(A, dtype=np.float64)
    while not is_biisotonic(S):
        S = -np.sort(-S, axis=1)
        S = -np.sort(-S, axis=0)
    return S


def gen_random_biso(n, d, rng=None) -> BisoInstance:
    rng = rng if rng is not None else np.random.default_rng()
    S = monotone_rearrangement(rng.random((n, d)))
    row_perm, col_perm = random_permutation(n, rng), random_permutation(d, rng)
    return BisoInstance(unsort_matrix(S, row_perm, col_perm), row_perm, col_perm, "RandomBiso")


# ------------------------------------------------------------- serialization


def instance_to_text(instance: BisoInstance) -> str:
    lines = [f"{instance.n} {instance.d} {instance.model} {instance.p!r} {instance.h!r}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in instance.M]
    lines.append(" ".join(str(int(x)) for x in instance.row_perm))
    lines.append(" ".join(str(int(x)) for x in instance.col_perm))
    return "\n".join(lines) + "\n"


def instance_from_text(text: str) -> BisoInstance:
    lines = [line for line in text.splitlines() if line.strip()]
    n_s, d_s, model, p_s, h_s = lines[0].split()
    n, d = int(n_s), int(d_s)
    if len(lines) != n + 3:
        raise ValueError(f"expected {n + 3} non-empty lines, got {len(lines)}")
    M = np.array([[float(x) for x in line.split()] for line in lines[1 : n + 1]])
    if M.shape != (n, d):
        raise ValueError("matrix block does not match the header")
    row_perm = np.array(lines[n + 1].split(), dtype=np.int64)
    col_perm = np.array(lines[n + 2].split(), dtype=np.int64)
    return BisoInstance(M, row_perm, col_perm, model, float(p_s), float(h_s))
