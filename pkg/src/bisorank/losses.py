"""Evaluation metrics comparing estimates with the ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NA, BisoInstance, ClassificationMatrix, check_permutation, inverse

KINDS = ("Lph", "Rph", "Cph", "L01NA", "Frobenius", "KendallTau", "RtildeDiag")


@dataclass(frozen=True)
class LossReport:
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.value < 0:
            raise ValueError("losses are nonnegative")


def _confusions(A, B, p, h) -> int:
    lo, hi = p - h, p + h
    return int(np.count_nonzero((A <= lo) & (B >= hi)) + np.count_nonzero((A >= hi) & (B <= lo)))


def loss_lph(instance: BisoInstance, pi_hat, eta_hat, p, h) -> int:
    """Number of entries below ``p-h`` swapped with entries above ``p+h``."""
    pi_hat = check_permutation(pi_hat, instance.n)
    eta_hat = check_permutation(eta_hat, instance.d)
    M = instance.M
    A = M[inverse(instance.row_perm)][:, inverse(instance.col_perm)]
    B = M[inverse(pi_hat)][:, inverse(eta_hat)]
    return _confusions(A, B, p, h)


def loss_rph(instance: BisoInstance, pi_hat, p, h) -> int:
    """Row-only version of :func:`loss_lph` (columns left in place)."""
    pi_hat = check_permutation(pi_hat, instance.n)
    M = instance.M
    return _confusions(M[inverse(instance.row_perm)], M[inverse(pi_hat)], p, h)


def loss_cph(instance: BisoInstance, eta_hat, p, h) -> int:
    eta_hat = check_permutation(eta_hat, instance.d)
    M = instance.M
    return _confusions(M[:, inverse(instance.col_perm)], M[:, inverse(eta_hat)], p, h)


def loss_l01na(truth: ClassificationMatrix, estimate: ClassificationMatrix) -> int:
    """Misclassified decided cells; an NA estimate on a decided cell is an error."""
    if truth.shape != estimate.shape:
        raise ValueError("shape mismatch")
    if truth.p != estimate.p or (estimate.h and truth.h != estimate.h):
        raise ValueError("truth and estimate refer to different (p, h)")
    decided = truth.cells != NA
    return int(np.count_nonzero(decided & (truth.cells != estimate.cells)))


def loss_frobenius_perm(instance: BisoInstance, pi_hat, eta_hat) -> float:
    M = instance.M
    A = M[inverse(instance.row_perm)][:, inverse(instance.col_perm)]
    B = M[inverse(check_permutation(pi_hat, instance.n))][:, inverse(check_permutation(eta_hat, instance.d))]
    return float(np.sum((A - B) ** 2))


def _merge_count(seq: list) -> tuple[list, int]:
    if len(seq) <= 1:
        return seq, 0
    mid = len(seq) // 2
    left, a = _merge_count(seq[:mid])
    right, b = _merge_count(seq[mid:])
    merged, inv = [], a + b
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def kendall_tau(pi1, pi2) -> int:
    """Number of pairs ordered one way by ``pi2`` and the other way by ``pi1``."""
    pi1 = check_permutation(pi1)
    pi2 = check_permutation(pi2, pi1.size)
    # walk the items in pi2 order and count inversions of their pi1 positions
    seq = pi1[inverse(pi2)].tolist()
    return _merge_count(seq)[1]


def rtilde_diag(instance: BisoInstance, rows, cols, p, h) -> int:
    """Most entries of ``rows x cols`` that row exchanges could confuse across ``p``."""
    sub = instance.M[np.ix_(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))]
    low = np.count_nonzero(sub <= p - h, axis=0)
    high = np.count_nonzero(sub >= p + h, axis=0)
    return int(np.minimum(low, high).sum())
