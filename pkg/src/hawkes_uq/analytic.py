"""Closed forms for the stationary exponential-kernel process.

With unit-mass kernels ``beta * exp(-beta t)`` shared by every pair, the
branching matrix is ``A`` itself and second-order statistics of the filtered
counting process ``eta(t) = int beta exp(-beta (t - s)) dN_s`` are available
in closed form.  These serve as oracles for the simulator and as
diagnostics for the Fisher information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from hawkes_uq.errors import KernelUnsupported, NonStationary


@dataclass(frozen=True)
class StationarySummary:
    Lambda: np.ndarray
    Sigma: np.ndarray
    W: np.ndarray
    spectral_radius: float

    def to_dict(self) -> dict:
        return {
            "Lambda": self.Lambda.tolist(),
            "Sigma": self.Sigma.tolist(),
            "W": self.W.tolist(),
            "spectral_radius": self.spectral_radius,
        }


def _check(A: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho >= 1.0:
        raise NonStationary(f"spectral radius {rho:.6g} >= 1")
    return A


def _resolvent(A: np.ndarray) -> np.ndarray:
    """``(I - A)^-1`` via an LU factorization."""
    D = A.shape[0]
    return linalg.lu_solve(linalg.lu_factor(np.eye(D) - A), np.eye(D))


def stationary_intensity(mu, A) -> np.ndarray:
    """Expected intensity ``Lambda`` solving ``(I - A) Lambda = mu``."""
    A = _check(A)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    return linalg.lu_solve(linalg.lu_factor(np.eye(A.shape[0]) - A), mu)


def w_matrix(mu, A, beta: float) -> np.ndarray:
    """Second moment ``E[eta eta^T]`` of the stationary filtered process."""
    A = _check(A)
    if not beta > 0:
        raise ValueError("beta must be > 0")
    lam = stationary_intensity(mu, A)
    S = np.diag(lam)
    R = _resolvent(A)
    W = np.outer(lam, lam) + 0.5 * beta * S + 0.25 * beta * (A @ R @ S) + 0.25 * beta * (S @ A.T @ R.T)
    return 0.5 * (W + W.T)


def fisher_upper_bound(mu_i: float, W) -> np.ndarray:
    """``W / mu_i``, which dominates the node-``i`` Fisher information."""
    if not mu_i > 0:
        raise ValueError("mu_i must be > 0")
    return np.asarray(W, dtype=float) / mu_i


def score_tail_bound(z, W, mu_i: float, eps_scale: float) -> float:
    """Chebyshev bound on ``P(z . S_i(alpha*) >= eps_scale * sqrt(T))``."""
    if not eps_scale > 0:
        raise ValueError("eps_scale must be > 0")
    z = np.asarray(z, dtype=float)
    return float(min(1.0, (z @ np.asarray(W) @ z) / mu_i / eps_scale**2))


def covariance_density(A, mu, beta: float, tau: float) -> np.ndarray:
    """Cross-covariance density ``c(tau)`` of the counting increments, ``tau != 0``.

    The atom at zero lag (``Sigma * delta``) is not included.
    """
    A = _check(A)
    if tau == 0:
        raise ValueError("tau = 0 is the Dirac atom; use Sigma = diag(Lambda)")
    if tau < 0:
        return covariance_density(A, mu, beta, -tau).T
    D = A.shape[0]
    I = np.eye(D)
    S = np.diag(stationary_intensity(mu, A))
    R = _resolvent(A)
    return beta * linalg.expm(-beta * (I - A) * tau) @ A @ (I + 0.5 * R @ A) @ S


def summary(params) -> StationarySummary:
    """Stationary summary for a model whose kernels are one shared exponential."""
    beta = params.shared_exponential_beta
    if beta is None:
        raise KernelUnsupported("closed forms require one exponential kernel shared by all pairs")
    lam = stationary_intensity(params.mu, params.A)
    return StationarySummary(lam, np.diag(lam), w_matrix(params.mu, params.A, beta), params.spectral_radius)


def empirical_eta_second_moment(seq, beta: float, burn_in: float = 0.0) -> np.ndarray:
    """Time average of ``eta eta^T`` over ``[burn_in, T]``, integrated exactly.

    Between events each coordinate decays as ``exp(-beta t)``, so
    ``int eta eta^T dt`` over a gap of length ``g`` is
    ``eta eta^T (1 - exp(-2 beta g)) / (2 beta)``.
    """
    D = seq.D
    eta = np.zeros(D)
    acc = np.zeros((D, D))
    t = 0.0
    for s, u in zip(np.append(seq.times, seq.T), np.append(seq.nodes, -1)):
        lo = max(t, burn_in)
        if s > lo:
            e0 = eta * np.exp(-beta * (lo - t))
            acc += np.outer(e0, e0) * (-np.expm1(-2 * beta * (s - lo))) / (2 * beta)
        eta = eta * np.exp(-beta * (s - t))
        t = s
        if u >= 0:
            eta[u] += beta
    return acc / (seq.T - burn_in)
