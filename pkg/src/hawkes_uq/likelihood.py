"""Per-node log-likelihood, score, Hessian and Fisher-information estimators.

The log-likelihood of the full process splits into one concave term per
target node, each depending only on that node's row of the influence matrix.
Everything here works on one such term.  The sufficient statistics of a
(sequence, node, kernel row) triple do not depend on ``alpha`` and are cached
on the sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from hawkes_uq.process import EventSequence, KernelRow, as_row, eta_matrix, eta_integral_matrix

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class NodeModel:
    """Row ``i`` of a Hawkes model: background rate, influence weights, kernels."""

    i: int
    mu: float
    alpha: np.ndarray
    kernels: KernelRow

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        if not float(self.mu) > 0:
            raise ValueError("mu must be > 0")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise ValueError("alpha must be finite and >= 0")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kernels", as_row(self.kernels, alpha.size))

    @classmethod
    def from_params(cls, params, i: int) -> "NodeModel":
        return cls(i, params.mu[i], params.A[i], params.kernel_row(i))


class NodeStats(NamedTuple):
    times: np.ndarray  # node-i event times
    eta: np.ndarray  # (n_i, D) excitation at those times, strict past
    eta_integral: np.ndarray  # (D,) int_0^T eta dt
    T: float


def node_stats(seq: EventSequence, i: int, kernels: KernelRow) -> NodeStats:
    row = as_row(kernels, seq.D)
    key = ("stats", int(i), row)
    st = seq._cache.get(key)
    if st is None:
        te = seq.node_times(i)
        X = eta_matrix(seq, row, te)
        E = eta_integral_matrix(seq, row, [seq.T])[0]
        st = NodeStats(te, X, E, seq.T)
        seq._cache[key] = st
    return st


def _lam(st: NodeStats, mu: float, alpha: np.ndarray) -> np.ndarray:
    return mu + st.eta @ alpha


def loglik_stats(st: NodeStats, mu: float, alpha: np.ndarray) -> float:
    lam = _lam(st, mu, alpha)
    return float(-mu * st.T - alpha @ st.eta_integral + np.sum(np.log(lam)))


def score_stats(st: NodeStats, mu: float, alpha: np.ndarray) -> np.ndarray:
    lam = _lam(st, mu, alpha)
    return (st.eta / lam[:, None]).sum(axis=0) - st.eta_integral


def hessian_stats(st: NodeStats, mu: float, alpha: np.ndarray) -> np.ndarray:
    lam = _lam(st, mu, alpha)
    W = st.eta / lam[:, None]
    return -(W.T @ W)


def loglik(m: NodeModel, seq: EventSequence) -> float:
    """``-int_0^T lambda_i dt + sum_{node-i events} log lambda_i(t_e)``."""
    return loglik_stats(node_stats(seq, m.i, m.kernels), m.mu, m.alpha)


def score(m: NodeModel, seq: EventSequence) -> np.ndarray:
    """Gradient of :func:`loglik` in ``alpha``; the time integral is exact."""
    return score_stats(node_stats(seq, m.i, m.kernels), m.mu, m.alpha)


def hessian(m: NodeModel, seq: EventSequence) -> np.ndarray:
    """``-sum eta eta^T / lambda^2`` over node-i events.  Negative semidefinite."""
    return hessian_stats(node_stats(seq, m.i, m.kernels), m.mu, m.alpha)


def empirical_fisher(m: NodeModel, seq: EventSequence) -> np.ndarray:
    """Observed information per unit time, ``-hessian / T``.

    Use :func:`is_rank_deficient` to detect the singular case.
    """
    return -hessian(m, seq) / seq.T


def is_rank_deficient(mat: np.ndarray, rtol: float = RANK_RTOL) -> bool:
    """True when the smallest eigenvalue is below ``rtol`` times the largest."""
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    return bool(w[-1] <= 0 or w[0] < rtol * w[-1])


def adapted_fisher(m: NodeModel, seq: EventSequence, t: float) -> np.ndarray:
    """Information estimate from node-i events strictly before ``t``, divided by ``t``.

    Falls back to the identity when the estimate is rank deficient.
    """
    if not 0 <= t <= seq.T:
        raise ValueError(f"t must lie in [0, T], got {t}")
    D = seq.D
    st = node_stats(seq, m.i, m.kernels)
    n = int(np.searchsorted(st.times, t, side="left"))
    if t == 0 or n == 0:
        return np.eye(D)
    lam = _lam(st, m.mu, m.alpha)[:n]
    W = st.eta[:n] / lam[:, None]
    est = (W.T @ W) / t
    if is_rank_deficient(est):
        return np.eye(D)
    return est
