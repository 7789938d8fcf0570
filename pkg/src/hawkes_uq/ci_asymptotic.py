"""Classical per-entry confidence intervals from MLE asymptotic normality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from hawkes_uq.errors import SingularFisher


@dataclass
class ConfidenceReport:
    """Per-entry intervals for one or more rows of the influence matrix.

    ``point``, ``lo`` and ``hi`` have shape ``(len(rows), D)``; row ``r`` of
    each array refers to target node ``rows[r]``.  ``lo`` is not clipped at 0.
    """

    method: str
    epsilon: float
    rows: list[int]
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    flags: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        self.point = np.atleast_2d(np.asarray(self.point, dtype=float))
        self.lo = np.atleast_2d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_2d(np.asarray(self.hi, dtype=float))

    @property
    def level(self) -> float:
        return 1.0 - self.epsilon

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def lo_clipped(self) -> np.ndarray:
        return np.maximum(self.lo, 0.0)

    def row(self, i: int) -> int:
        return self.rows.index(i)

    def covers(self, truth: np.ndarray) -> np.ndarray:
        """Boolean matrix over ``rows`` x D: interval contains the true entry."""
        truth = np.asarray(truth, dtype=float)[self.rows]
        return (self.lo <= truth) & (truth <= self.hi)

    def entries(self):
        for r, i in enumerate(self.rows):
            for j in range(self.point.shape[1]):
                yield i, j, self.point[r, j], self.lo[r, j], self.hi[r, j]


def combine(reports: list[ConfidenceReport]) -> ConfidenceReport:
    """Stack single-node reports that share a method and level."""
    first = reports[0]
    flags: dict = {}
    diagnostics: dict = {}
    for rep in reports:
        for key, val in rep.flags.items():
            flags.setdefault(key, []).extend(val)
        for key, val in rep.diagnostics.items():
            diagnostics.setdefault(key, []).extend(val)
    return ConfidenceReport(
        method=first.method,
        epsilon=first.epsilon,
        rows=[i for rep in reports for i in rep.rows],
        point=np.vstack([rep.point for rep in reports]),
        lo=np.vstack([rep.lo for rep in reports]),
        hi=np.vstack([rep.hi for rep in reports]),
        flags=flags,
        diagnostics=diagnostics,
    )


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return float(special.ndtri(p))


def bonferroni_z(epsilon: float, D: int) -> float:
    """Upper ``epsilon / 2D`` point of the standard normal."""
    return normal_quantile(1.0 - epsilon / (2.0 * D))


def inverse_fisher(fisher: np.ndarray) -> np.ndarray:
    fisher = np.asarray(fisher, dtype=float)
    try:
        c = linalg.cho_factor(0.5 * (fisher + fisher.T), lower=True)
    except linalg.LinAlgError:
        raise SingularFisher("Fisher information is not positive definite") from None
    inv = linalg.cho_solve(c, np.eye(fisher.shape[0]))
    if not np.all(np.isfinite(inv)):
        raise SingularFisher("Fisher information inverse is not finite")
    return inv


def asymptotic_ci(alpha_hat, fisher, T: float, epsilon: float, D: int | None = None, node: int = 0) -> ConfidenceReport:
    """``alpha_hat_j +/- z * sqrt(var_j / T)`` with ``var = diag(fisher^-1)``."""
    alpha_hat = np.asarray(alpha_hat, dtype=float).reshape(-1)
    D = alpha_hat.size if D is None else int(D)
    if not T > 0:
        raise ValueError("T must be > 0")
    z = bonferroni_z(epsilon, D)
    var = np.diag(inverse_fisher(fisher))
    half = z * np.sqrt(var / T)
    return ConfidenceReport(
        method="asymptotic",
        epsilon=epsilon,
        rows=[int(node)],
        point=alpha_hat[None, :],
        lo=(alpha_hat - half)[None, :],
        hi=(alpha_hat + half)[None, :],
        flags={"singular_fisher": []},
        diagnostics={"z": [z]},
    )


def width_ratio_limit(epsilon: float, D: int) -> float:
    """Large-T ratio of concentration to asymptotic widths."""
    return math.sqrt(2.0 * math.log(2.0 * D / epsilon)) / bonferroni_z(epsilon, D)
