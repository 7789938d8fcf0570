import numpy as np
import pytest

from hawkes_uq import EventSequence, Exponential, ModelParams
from hawkes_uq.ci_asymptotic import inverse_fisher
from hawkes_uq.likelihood import NodeModel, empirical_fisher, loglik, score
from hawkes_uq.mle import SolverOptions, fit_all, fit_node, projected_gradient
from hawkes_uq.simulate import simulate

from conftest import random_params


def test_no_events_gives_exact_zero():
    seq = EventSequence([0.5, 1.0], [1, 1], 10.0, 2)
    alpha, diag = fit_node(seq, 0, 1.0, Exponential(1.0))
    assert np.array_equal(alpha, np.zeros(2))
    assert diag.converged and diag.active_set == [0, 1]


def test_invalid_mu():
    with pytest.raises(ValueError):
        fit_node(EventSequence([], [], 1.0, 1), 0, 0.0, Exponential(1.0))


def test_kkt_and_global_optimality(sparse_params, sparse_seq, rng):
    for i in range(3):
        row = sparse_params.kernel_row(i)
        mu = sparse_params.mu[i]
        alpha, diag = fit_node(sparse_seq, i, mu, row)
        assert diag.converged
        g = score(NodeModel(i, mu, alpha, row), sparse_seq)
        free = alpha > 0
        assert np.all(np.abs(g[free]) <= 1e-8)
        assert np.all(g[~free] <= 1e-8)
        best = loglik(NodeModel(i, mu, alpha, row), sparse_seq)
        for _ in range(100):
            a = np.maximum(alpha + rng.normal(0, 0.1, 3), 0)
            assert loglik(NodeModel(i, mu, a, row), sparse_seq) <= best + 1e-12


def test_random_restarts_agree(sparse_params, sparse_seq, rng):
    row = sparse_params.kernel_row(1)
    ref, _ = fit_node(sparse_seq, 1, 0.5, row)
    for _ in range(10):
        a, _ = fit_node(sparse_seq, 1, 0.5, row, SolverOptions(alpha0=rng.uniform(0, 2, 3)))
        assert np.max(np.abs(a - ref)) <= 1e-6


def test_long_run_recovers_truth_within_three_se():
    params = ModelParams(np.array([0.5, 0.4]), np.array([[0.4, 0.2], [0.3, 0.3]]), Exponential(1.0))
    T = 2000.0
    seq = simulate(params, T, 8)
    A_hat, diags = fit_all(seq, params.mu, params.kernels)
    for i in range(2):
        F = empirical_fisher(NodeModel(i, params.mu[i], A_hat[i], params.kernel_row(i)), seq)
        se = np.sqrt(np.diag(inverse_fisher(F)) / T)
        assert np.all(np.abs(A_hat[i] - params.A[i]) <= 3 * se)
    assert all(d.converged for d in diags)


def test_fit_all_d1_matches_fit_node():
    params = ModelParams(np.array([0.7]), np.array([[0.5]]), Exponential(2.0))
    seq = simulate(params, 200.0, 4)
    A, _ = fit_all(seq, params.mu, params.kernels)
    a, _ = fit_node(seq, 0, 0.7, params.kernel_row(0))
    np.testing.assert_array_equal(A[0], a)


def test_fit_all_serial_equals_parallel_and_subsets(sparse_params, sparse_seq):
    A1, _ = fit_all(sparse_seq, sparse_params.mu, sparse_params.kernels, workers=1)
    A2, _ = fit_all(sparse_seq, sparse_params.mu, sparse_params.kernels, workers=2)
    np.testing.assert_array_equal(A1, A2)
    A3, d3 = fit_all(sparse_seq, sparse_params.mu, sparse_params.kernels, nodes=[0, 2])
    assert np.all(np.isnan(A3[1])) and [d.node for d in d3] == [0, 2]
    np.testing.assert_array_equal(A3[[0, 2]], A1[[0, 2]])


def test_short_sparse_fit_is_denser_than_truth(sparse_params):
    # the support of short-horizon estimates exceeds the true support
    seq = simulate(sparse_params, 200.0, 99)
    A_hat, _ = fit_all(seq, sparse_params.mu, sparse_params.kernels)
    assert (A_hat > 1e-8).sum() > (sparse_params.A > 0).sum()


def test_diagnostics_report_active_set_and_conditioning(sparse_params, sparse_seq):
    _, diags = fit_all(sparse_seq, sparse_params.mu, sparse_params.kernels)
    for d in diags:
        dd = d.to_dict()
        assert set(dd) >= {"node", "iterations", "converged", "projected_grad_norm", "active_set", "hessian_condition"}
        assert dd["projected_grad_norm"] <= 1e-8
        assert dd["hessian_condition"] >= 1


def test_max_iters_flagged(sparse_params, sparse_seq):
    _, d = fit_node(sparse_seq, 0, 0.5, sparse_params.kernel_row(0), SolverOptions(max_iters=1))
    assert not d.converged and d.iterations == 1


def test_projected_gradient_blocks_only_outward_moves():
    pg = projected_gradient(np.array([0.0, 0.0, 1.0]), np.array([-1.0, 2.0, -3.0]))
    np.testing.assert_array_equal(pg, [0.0, 2.0, -3.0])


def test_fit_many_random_instances_converge(rng):
    for _ in range(5):
        params = random_params(rng)
        seq = simulate(params, 100.0, int(rng.integers(1 << 30)))
        _, diags = fit_all(seq, params.mu, params.kernels)
        assert all(d.converged for d in diags)
