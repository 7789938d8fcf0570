import numpy as np
import pytest
from scipy import integrate

from hawkes_uq import EventSequence, Exponential, Gamma, ModelParams
from hawkes_uq.analytic import (
    covariance_density,
    empirical_eta_second_moment,
    fisher_upper_bound,
    score_tail_bound,
    stationary_intensity,
    summary,
    w_matrix,
)
from hawkes_uq.errors import KernelUnsupported, NonStationary
from hawkes_uq.likelihood import NodeModel, empirical_fisher
from hawkes_uq.process import eta_matrix
from hawkes_uq.simulate import simulate


def random_stationary(rng, D):
    A = rng.uniform(0, 1, (D, D))
    A *= rng.uniform(0.1, 0.9) / np.abs(np.linalg.eigvals(A)).max()
    return rng.uniform(0.2, 1.5, D), A


def test_intensity_examples():
    np.testing.assert_allclose(stationary_intensity([0.3, 0.7], np.zeros((2, 2))), [0.3, 0.7])
    assert stationary_intensity([1.0], [[0.5]])[0] == pytest.approx(2.0)


def test_intensity_solves_linear_system(rng):
    for _ in range(20):
        mu, A = random_stationary(rng, 4)
        lam = stationary_intensity(mu, A)
        np.testing.assert_allclose((np.eye(4) - A) @ lam, mu, atol=1e-10)
        assert np.all(lam > 0)


def test_w_examples():
    mu = np.array([0.4, 0.9])
    np.testing.assert_allclose(w_matrix(mu, np.zeros((2, 2)), 3.0), np.outer(mu, mu) + 1.5 * np.diag(mu), rtol=1e-14)
    lam = 2.0
    ref = lam**2 + (2.0 / 2) * lam + 2 * (2.0 / 4) * (0.5 / 0.5) * lam
    assert w_matrix([1.0], [[0.5]], 2.0)[0, 0] == pytest.approx(ref)


def test_w_symmetric_and_excess_psd(rng):
    for _ in range(50):
        mu, A = random_stationary(rng, 3)
        W = w_matrix(mu, A, rng.uniform(0.2, 5))
        assert np.max(np.abs(W - W.T)) <= 1e-12
        lam = stationary_intensity(mu, A)
        assert np.linalg.eigvalsh(W - np.outer(lam, lam)).min() >= -1e-10


def test_nonstationary_everywhere():
    A = np.array([[1.1]])
    for fn in (lambda: stationary_intensity([1.0], A), lambda: w_matrix([1.0], A, 1.0), lambda: covariance_density(A, [1.0], 1.0, 0.5)):
        with pytest.raises(NonStationary):
            fn()


def test_fisher_bound_scaling():
    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(fisher_upper_bound(1.0, W), W)
    np.testing.assert_allclose(fisher_upper_bound(2.0, W), W / 2)


def test_tail_bound_edges():
    W = np.eye(2)
    assert score_tail_bound([0.0, 0.0], W, 1.0, 0.5) == 0.0
    assert score_tail_bound([10.0, 0.0], W, 1.0, 0.5) == 1.0
    with pytest.raises(ValueError):
        score_tail_bound([1.0, 0.0], W, 1.0, 0.0)


def test_covariance_density_examples(rng):
    np.testing.assert_array_equal(covariance_density(np.zeros((2, 2)), [1.0, 1.0], 1.0, 0.7), 0.0)
    mu, A = random_stationary(rng, 3)
    np.testing.assert_allclose(covariance_density(A, mu, 1.3, -0.4), covariance_density(A, mu, 1.3, 0.4).T)
    with pytest.raises(ValueError):
        covariance_density(A, mu, 1.0, 0.0)


def test_covariance_density_integrates_to_w_cross_terms():
    mu = np.array([0.5, 0.4])
    A = np.array([[0.3, 0.2], [0.1, 0.4]])
    beta = 1.5
    lam = stationary_intensity(mu, A)
    rho = np.abs(np.linalg.eigvals(A)).max()
    upper = 40 / (beta * (1 - rho))
    M = np.zeros((2, 2))
    for r in range(2):
        for c in range(2):
            def f(t, r=r, c=c):
                C = covariance_density(A, mu, beta, t)
                return np.exp(-beta * t) * (C + C.T)[r, c]

            M[r, c] = 0.5 * beta * integrate.quad(f, 0, upper, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    target = w_matrix(mu, A, beta) - np.outer(lam, lam) - 0.5 * beta * np.diag(lam)
    np.testing.assert_allclose(M, target, rtol=1e-4)


def test_summary_requires_shared_exponential():
    p = ModelParams(np.array([0.5]), np.array([[0.2]]), Gamma(2.0, 1.0))
    with pytest.raises(KernelUnsupported):
        summary(p)
    s = summary(ModelParams(np.array([0.5]), np.array([[0.2]]), Exponential(2.0)))
    assert s.Lambda[0] == pytest.approx(0.625)
    assert set(s.to_dict()) == {"Lambda", "Sigma", "W", "spectral_radius"}


def test_eta_second_moment_matches_dense_grid(rng):
    seq = EventSequence(np.sort(rng.uniform(0, 20, 30)), rng.integers(0, 2, 30), 20.0, 2)
    beta = 1.3
    exact = empirical_eta_second_moment(seq, beta, burn_in=2.0)
    knots = np.unique(np.concatenate([[2.0], seq.times[seq.times > 2.0], [20.0]]))
    acc = np.zeros((2, 2))
    for a, b in zip(knots[:-1], knots[1:]):
        t = np.linspace(a, b, 3000)
        t[0] = np.nextafter(a, b)
        E = eta_matrix(seq, (Exponential(beta), Exponential(beta)), t)
        acc += integrate.simpson(np.einsum("ni,nj->nij", E, E), x=t, axis=0)
    np.testing.assert_allclose(exact, acc / 18.0, rtol=1e-6)


def test_fisher_bound_dominates_long_run_information():
    mu = np.array([0.5, 0.4])
    A = np.array([[0.3, 0.2], [0.1, 0.4]])
    params = ModelParams(mu, A, Exponential(1.0))
    seq = simulate(params, 3000.0, 12)
    W = w_matrix(mu, A, 1.0)
    for i in range(2):
        gap = fisher_upper_bound(mu[i], W) - empirical_fisher(NodeModel.from_params(params, i), seq)
        assert np.linalg.eigvalsh(gap).min() >= -0.05 * np.linalg.norm(W)
