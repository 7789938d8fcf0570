import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hawkes_uq import EventSequence, Exponential, Gamma, ModelParams
from hawkes_uq.likelihood import (
    NodeModel,
    adapted_fisher,
    empirical_fisher,
    hessian,
    is_rank_deficient,
    loglik,
    score,
)
from hawkes_uq.simulate import simulate

from conftest import random_params, random_sequence


def brute_lambda(m, seq, t):
    lam = m.mu
    for s, j in zip(seq.times, seq.nodes):
        if s < t:
            lam += m.alpha[j] * float(m.kernels[j].evaluate(t - s))
    return lam


def quad_loglik(m, seq):
    knots = np.concatenate([[0.0], seq.times, [seq.T]])
    comp = sum(integrate.quad(lambda t: brute_lambda(m, seq, t), a, b, epsrel=1e-12)[0] for a, b in zip(knots[:-1], knots[1:]) if b > a)
    return -comp + sum(math.log(brute_lambda(m, seq, t)) for t in seq.node_times(m.i))


def fd_grad(f, x, rel=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        h = rel * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_no_events():
    seq = EventSequence([], [], 10.0, 2)
    m = NodeModel(0, 1.0, np.array([0.3, 0.2]), Exponential(1.0))
    assert loglik(m, seq) == pytest.approx(-10.0)
    np.testing.assert_array_equal(score(m, seq), 0.0)
    np.testing.assert_array_equal(hessian(m, seq), 0.0)
    F = empirical_fisher(m, seq)
    np.testing.assert_array_equal(F, 0.0)
    assert is_rank_deficient(F)


def test_uncoupled_poisson_loglik(rng):
    seq = random_sequence(rng, D=2, T=30.0, n=25)
    n0 = seq.counts()[0]
    m = NodeModel(0, 0.7, np.zeros(2), Exponential(1.0))
    assert loglik(m, seq) == pytest.approx(-0.7 * 30 + n0 * math.log(0.7))


def test_single_event_hessian_zero():
    seq = EventSequence([1.0], [0], 5.0, 1)
    np.testing.assert_array_equal(hessian(NodeModel(0, 1.0, [0.5], Exponential(1.0)), seq), 0.0)


@pytest.mark.parametrize("kernel", [Exponential(1.3), Gamma(2.0, 1.0)])
def test_loglik_matches_quadrature_oracle(rng, kernel):
    seq = random_sequence(rng, D=2, T=15.0, n=20)
    m = NodeModel(1, 0.6, np.array([0.4, 0.3]), kernel)
    assert loglik(m, seq) == pytest.approx(quad_loglik(m, seq), rel=1e-6, abs=1e-8)


def test_score_and_hessian_match_finite_differences(rng):
    for _ in range(10):
        params = random_params(rng)
        seq = simulate(params, 50.0, int(rng.integers(1 << 30)))
        for i in range(3):
            a = params.A[i] + rng.uniform(0.05, 0.3, 3)
            m = NodeModel(i, params.mu[i], a, params.kernel_row(i))
            f = lambda x: loglik(NodeModel(i, m.mu, x, m.kernels), seq)  # noqa: E731
            s = lambda x: score(NodeModel(i, m.mu, x, m.kernels), seq)  # noqa: E731
            fd = fd_grad(f, a)
            assert np.max(np.abs(score(m, seq) - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))
            J = np.array([fd_grad(lambda x: s(x)[r], a) for r in range(3)])
            assert np.max(np.abs(hessian(m, seq) - J)) <= 1e-4 * max(1.0, np.max(np.abs(J)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_hessian_negative_semidefinite(seed):
    rng = np.random.default_rng(seed)
    seq = random_sequence(rng, D=3, T=40.0, n=50)
    m = NodeModel(int(rng.integers(3)), rng.uniform(0.1, 2), rng.uniform(0, 1, 3), Exponential(rng.uniform(0.3, 3)))
    H = hessian(m, seq)
    np.testing.assert_allclose(H, H.T, atol=1e-14)
    assert np.linalg.eigvalsh(H).max() <= 1e-10


def test_hessian_negative_definite_on_generic_data(sparse_params, sparse_seq):
    for i in range(3):
        H = hessian(NodeModel.from_params(sparse_params, i), sparse_seq)
        assert np.linalg.eigvalsh(H).max() < -1e-8


def test_fisher_scales_inversely_with_horizon(sparse_params, sparse_seq):
    m = NodeModel.from_params(sparse_params, 0)
    longer = EventSequence(sparse_seq.times, sparse_seq.nodes, 2 * sparse_seq.T, 3)
    np.testing.assert_allclose(empirical_fisher(m, longer), empirical_fisher(m, sparse_seq) / 2, rtol=1e-14)


def test_adapted_fisher_branches(sparse_params, sparse_seq):
    m = NodeModel.from_params(sparse_params, 0)
    first = sparse_seq.node_times(0)[0]
    np.testing.assert_array_equal(adapted_fisher(m, sparse_seq, first), np.eye(3))
    np.testing.assert_array_equal(adapted_fisher(m, sparse_seq, 0.0), np.eye(3))
    np.testing.assert_allclose(adapted_fisher(m, sparse_seq, sparse_seq.T), empirical_fisher(m, sparse_seq), rtol=1e-13)
    with pytest.raises(ValueError):
        adapted_fisher(m, sparse_seq, sparse_seq.T + 1)


def test_adapted_fisher_accumulates_in_psd_order(sparse_params, sparse_seq, rng):
    m = NodeModel.from_params(sparse_params, 1)
    for _ in range(20):
        t1, t2 = np.sort(rng.uniform(50, sparse_seq.T, 2))
        F1, F2 = adapted_fisher(m, sparse_seq, t1) * t1, adapted_fisher(m, sparse_seq, t2) * t2
        assert np.linalg.eigvalsh(F2 - F1).min() >= -1e-10 * np.abs(F2).max()


def test_adapted_fisher_ignores_future(sparse_params, sparse_seq):
    m = NodeModel.from_params(sparse_params, 0)
    t = 120.0
    keep = sparse_seq.times < t
    cut = EventSequence(sparse_seq.times[keep], sparse_seq.nodes[keep], sparse_seq.T, 3)
    np.testing.assert_allclose(adapted_fisher(m, cut, t), adapted_fisher(m, sparse_seq, t), rtol=1e-14)


def test_rank_deficiency_threshold():
    assert is_rank_deficient(np.diag([1.0, 1e-11]))
    assert not is_rank_deficient(np.diag([1.0, 1e-9]))
    assert is_rank_deficient(np.zeros((2, 2)))


def test_node_model_validation():
    with pytest.raises(ValueError):
        NodeModel(0, 0.0, [0.1], Exponential(1.0))
    with pytest.raises(ValueError):
        NodeModel(0, 1.0, [-0.1], Exponential(1.0))
