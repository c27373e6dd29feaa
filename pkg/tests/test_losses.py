import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisorank.losses import (
    LossReport,
    kendall_tau,
    loss_cph,
    loss_frobenius_perm,
    loss_l01na,
    loss_lph,
    loss_rph,
    rtilde_diag,
)
from bisorank.model import (
    NA,
    BisoInstance,
    ClassificationMatrix,
    gen_noisy_sorting,
    gen_random_biso,
    gen_two_value,
    identity,
    oracle_level_set,
    reversed_perm,
)
from oracles import naive_kendall, naive_l01na, naive_lph

seeds = st.integers(0, 2**32 - 1)
# dyadic thresholds keep p - h - h == p - 2h exact in floating point
dyadic_p = st.integers(4, 12).map(lambda k: k / 16)
dyadic_h = st.integers(1, 4).map(lambda k: k / 32)


def test_two_by_two_swap():
    inst = BisoInstance(np.array([[0.9, 0.9], [0.1, 0.1]]), identity(2), identity(2))
    assert loss_lph(inst, [1, 0], identity(2), 0.5, 0.2) == 4


def test_identity_estimate_is_zero():
    inst = gen_random_biso(5, 4, np.random.default_rng(0))
    assert loss_lph(inst, inst.row_perm, inst.col_perm, 0.5, 0.1) == 0
    assert loss_rph(inst, inst.row_perm, 0.5, 0.1) == 0
    assert loss_cph(inst, inst.col_perm, 0.5, 0.1) == 0
    assert loss_frobenius_perm(inst, inst.row_perm, inst.col_perm) == 0


def test_row_swap_counts_differing_columns():
    rng = np.random.default_rng(4)
    inst = gen_two_value(6, 7, 0.5, 0.3, boundary=[6, 5, 4, 4, 2, 1, 0], rng=rng)
    a, b = 1, 4  # two sorted positions
    rows = inst.row_perm.copy()
    ia, ib = np.flatnonzero(rows == a)[0], np.flatnonzero(rows == b)[0]
    rows[ia], rows[ib] = b, a
    S = inst.sorted()
    differ = int(np.count_nonzero(S[a] != S[b]))
    assert differ > 0
    assert loss_rph(inst, rows, 0.5, 0.3) == 2 * differ


def test_dimension_mismatch_raises():
    inst = gen_random_biso(3, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        loss_lph(inst, identity(4), identity(3), 0.5, 0.1)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), seeds, dyadic_p, dyadic_h)
def test_losses_match_cell_by_cell(n, d, seed, p, h):
    rng = np.random.default_rng(seed)
    inst = gen_random_biso(n, d, rng)
    pi_hat, eta_hat = rng.permutation(n), rng.permutation(d)
    M = inst.M.tolist()
    assert loss_lph(inst, pi_hat, eta_hat, p, h) == naive_lph(M, inst.row_perm, inst.col_perm, pi_hat, eta_hat, p, h)
    assert loss_rph(inst, pi_hat, p, h) == naive_lph(M, inst.row_perm, inst.col_perm, pi_hat, inst.col_perm, p, h)
    assert loss_cph(inst, eta_hat, p, h) == naive_lph(M, inst.row_perm, inst.col_perm, inst.row_perm, eta_hat, p, h)
    assert loss_lph(inst, pi_hat, eta_hat, p, h) <= n * d


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), seeds, dyadic_p, dyadic_h)
def test_shift_bounds(n, d, seed, p, h):
    rng = np.random.default_rng(seed)
    inst = gen_random_biso(n, d, rng)
    pi_hat, eta_hat = rng.permutation(n), rng.permutation(d)
    lph = loss_lph(inst, pi_hat, eta_hat, p, h)
    assert lph >= max(loss_rph(inst, pi_hat, p, h), loss_cph(inst, eta_hat, p, h))
    wide = loss_lph(inst, pi_hat, eta_hat, p, 2 * h)
    assert wide <= 2 * min(loss_rph(inst, pi_hat, p - h, h) + loss_cph(inst, eta_hat, p + h, h),
                           loss_cph(inst, eta_hat, p - h, h) + loss_rph(inst, pi_hat, p + h, h))
    assert lph * (2 * h) ** 2 <= loss_frobenius_perm(inst, pi_hat, eta_hat) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), seeds, dyadic_p, dyadic_h)
def test_l01na_matches_naive(n, d, seed, p, h):
    rng = np.random.default_rng(seed)
    inst = gen_random_biso(n, d, rng)
    truth = oracle_level_set(inst, p, h)
    est = ClassificationMatrix(rng.integers(-1, 2, size=(n, d)), p, h)
    assert loss_l01na(truth, est) == naive_l01na(truth.cells.tolist(), est.cells.tolist())


def test_l01na_examples():
    ones = ClassificationMatrix(np.ones((2, 3)), 0.5, 0.1)
    zeros = ClassificationMatrix(np.zeros((2, 3)), 0.5, 0.1)
    na = ClassificationMatrix(np.full((2, 3), NA), 0.5, 0.1)
    assert loss_l01na(ones, ones) == 0
    assert loss_l01na(ones, zeros) == 6
    assert loss_l01na(na, zeros) == 0
    # abstaining on a decided cell is an error
    assert loss_l01na(ones, na) == 6
    with pytest.raises(ValueError):
        loss_l01na(ones, ClassificationMatrix(np.ones((2, 3)), 0.4, 0.1))
    with pytest.raises(ValueError):
        loss_l01na(ones, ClassificationMatrix(np.ones((3, 2)), 0.5, 0.1))


def test_kendall_examples():
    assert kendall_tau(identity(5), identity(5)) == 0
    assert kendall_tau(identity(3), [0, 2, 1]) == 1
    assert kendall_tau(identity(7), reversed_perm(identity(7))) == 21


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), seeds)
def test_kendall_matches_pair_count(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.permutation(n), rng.permutation(n)
    assert kendall_tau(a, b) == naive_kendall(a.tolist(), b.tolist())
    assert kendall_tau(a, b) == kendall_tau(b, a)


@pytest.mark.parametrize("generalized", [False, True])
def test_noisy_sorting_identity_exhaustive(generalized):
    n, h = 5, 0.125
    inst = gen_noisy_sorting(n, h, generalized, np.random.default_rng(1))
    for guess in itertools.permutations(range(n)):
        guess = np.array(guess)
        lph = loss_lph(inst, guess, reversed_perm(guess), 0.5, h)
        assert lph == 2 * kendall_tau(guess, inst.row_perm)


def test_rtilde_examples():
    inst = BisoInstance(np.array([[0.8], [0.8], [0.2]]), identity(3), identity(1))
    assert rtilde_diag(inst, [0, 1, 2], [0], 0.5, 0.3) == 1
    assert rtilde_diag(inst, [2], [0], 0.5, 0.3) == 0
    assert rtilde_diag(inst, [0, 1], [0], 0.5, 0.3) == 0


def test_loss_report_rejects_negative():
    assert LossReport("Lph", 3).value == 3
    with pytest.raises(ValueError):
        LossReport("Lph", -1)
    with pytest.raises(ValueError):
        LossReport("nope", 1)
