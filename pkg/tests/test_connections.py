import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikectrl.connections import (DenseConnection, LowRankConnection,
                                   connection_apply, encode_input,
                                   fluctuation_weight_std, psp_kernel_sums)
from spikectrl.tensor import Tensor


def test_encode_identity_passes_input_through():
    x = Tensor(np.array([[0.3, -0.7, 0.1]]))
    w = Tensor(np.eye(3))
    b = Tensor(np.zeros(3))
    assert np.array_equal(encode_input(x, w, b).numpy(), x.numpy())


def test_encode_zero_input_returns_bias():
    x = Tensor(np.zeros((2, 3)))
    w = Tensor(np.ones((3, 4)))
    b = Tensor(np.array([0.1, -0.2, 0.3, 0.4]))
    out = encode_input(x, w, b).numpy()
    assert np.allclose(out, np.tile(b.numpy(), (2, 1)))


def test_encode_matches_triple_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 5))
    w = rng.normal(size=(5, 4))
    b = rng.normal(size=4)
    expected = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            for k in range(5):
                expected[i, j] += x[i, k] * w[k, j]
            expected[i, j] += b[j]
    out = encode_input(Tensor(x), Tensor(w), Tensor(b)).numpy()
    assert np.max(np.abs(out - expected)) < 1e-12


def test_low_rank_with_identity_second_stage_reproduces_dense():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(6, 4))
    dense = DenseConnection(6, 4, 1.0, rng)
    dense.w.data[...] = w
    lr = LowRankConnection(6, 4, 4, 1.0, rng)
    lr.a.data[...] = w
    lr.b_mat.data[...] = np.eye(4)
    lr.b.data[...] = 0.0
    x = Tensor(rng.normal(size=(5, 6)))
    assert np.array_equal(connection_apply(lr, x).numpy(),
                          connection_apply(dense, x).numpy())


def test_low_rank_from_dense_full_rank_is_exact():
    rng = np.random.default_rng(4)
    w = rng.normal(size=(40, 30))
    lr = LowRankConnection.from_dense(w)
    x = rng.normal(size=(8, 40))
    direct = x @ w
    factored = connection_apply(lr, Tensor(x)).numpy()
    assert np.max(np.abs(factored - direct)) < 1e-12


def test_param_counts_match_arithmetic():
    rng = np.random.default_rng(5)
    dense = DenseConnection(512, 512, 0.01, rng)
    assert dense.param_count() == 512 * 512 + 512 == 262656
    lr = LowRankConnection(512, 512, 64, 0.01, rng)
    assert lr.param_count() == 512 * 64 + 64 * 512 + 512 == 66048


def test_zero_input_returns_bias_for_both_kinds():
    rng = np.random.default_rng(6)
    x = Tensor(np.zeros((3, 8)))
    for conn in (DenseConnection(8, 5, 0.3, rng),
                 LowRankConnection(8, 5, 2, 0.3, rng)):
        conn.b.data[...] = np.arange(5, dtype=float)
        out = connection_apply(conn, x).numpy()
        assert np.allclose(out, np.tile(np.arange(5.0), (3, 1)))


def test_scale_multiplies_the_linear_map_but_not_the_bias():
    rng = np.random.default_rng(7)
    conn = DenseConnection(4, 3, 0.5, rng, scale=2.0)
    conn.b.data[...] = np.array([1.0, 1.0, 1.0])
    x = rng.normal(size=(2, 4))
    expected = 2.0 * (x @ conn.w.data) + 1.0
    assert np.allclose(connection_apply(conn, Tensor(x)).numpy(), expected)


def test_low_rank_rejects_nonpositive_rank():
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError):
        LowRankConnection(4, 4, 0, 0.1, rng)


# -- fluctuation-driven initialization ----------------------------------------

def test_kernel_sums_match_brute_force():
    for bm, bs in [(0.75, 0.24), (0.9, 0.5), (0.6, 0.6)]:
        m = np.arange(4000)
        if abs(bm - bs) < 1e-12:
            kernel = (1 - bm) * (m + 1) * bm ** m
        else:
            kernel = (1 - bm) * (bm ** (m + 1) - bs ** (m + 1)) / (bm - bs)
        ks, ksq = psp_kernel_sums(bm, bs)
        assert ks == pytest.approx(kernel.sum(), rel=1e-10)
        assert ksq == pytest.approx((kernel ** 2).sum(), rel=1e-10)


def test_membrane_statistics_hit_target_under_poisson_drive():
    # Monte-Carlo oracle: free membrane under binary spike trains at the
    # presumed rate should have std near 1 and mean near 0
    rng = np.random.default_rng(9)
    n_in, n_out = 100, 512
    dt = 0.02 / 7
    nu = 125.0
    sigma_w = fluctuation_weight_std(n_in, nu, 0.01, 0.002, dt)
    w = rng.normal(0.0, sigma_w, (n_in, n_out))
    p = nu * dt
    bm, bs = math.exp(-dt / 0.01), math.exp(-dt / 0.002)
    i_syn = np.zeros(n_out)
    u = np.zeros(n_out)
    samples = []
    for t in range(12000):
        x = (rng.random(n_in) < p).astype(float)
        i_syn = bs * i_syn + x @ w
        u = bm * u + (1 - bm) * i_syn
        if t >= 2000:
            samples.append(u.copy())
    pooled = np.asarray(samples)
    assert 0.8 < pooled.std() < 1.2
    assert abs(pooled.mean()) < 0.1


def test_recurrent_split_puts_nine_times_more_variance_on_feedforward():
    dt = 0.02 / 7
    rho = 0.9
    ff = fluctuation_weight_std(64, 125.0, 0.01, 0.002, dt,
                                sigma_target=rho ** 0.5)
    rec = fluctuation_weight_std(64, 125.0, 0.01, 0.002, dt,
                                 sigma_target=(1.0 - rho) ** 0.5)
    assert (ff / rec) ** 2 == pytest.approx(9.0, rel=1e-12)


def test_fluctuation_std_rejects_bad_rate():
    with pytest.raises(ValueError):
        fluctuation_weight_std(10, 0.0, 0.01, 0.002, 0.001)
    with pytest.raises(ValueError):
        fluctuation_weight_std(10, -5.0, 0.01, 0.002, 0.001)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.2), st.floats(0.001, 0.2))
def test_fluctuation_std_is_positive_and_finite(tau_mem, tau_syn):
    s = fluctuation_weight_std(32, 125.0, tau_mem, tau_syn, 0.001)
    assert 0.0 < s < np.inf
