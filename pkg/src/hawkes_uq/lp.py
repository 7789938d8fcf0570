"""Small dense linear programs: two-phase tableau simplex with Bland's rule.

Problems here have at most a few dozen rows and ``D`` columns, so a dense
tableau is both adequate and easy to audit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from hawkes_uq.errors import Infeasible

_TOL = 1e-11


class LPResult(NamedTuple):
    status: str  # "optimal" | "unbounded"
    x: np.ndarray
    value: float


def _pivot(tab: np.ndarray, r: int, c: int):
    tab[r] /= tab[r, c]
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _run(tab: np.ndarray, basis: list[int], n_cols: int, tol: float) -> bool:
    """Iterate on ``tab`` (objective in the last row, maximization). False if unbounded."""
    m = tab.shape[0] - 1
    scale = max(1.0, float(np.max(np.abs(tab[:m, :n_cols]))) if m else 1.0)
    while True:
        obj = tab[-1, :n_cols]
        enter = next((j for j in range(n_cols) if obj[j] < -tol * scale), None)
        if enter is None:
            return True
        col = tab[:m, enter]
        best = None
        for r in range(m):
            if col[r] > tol * scale:
                ratio = tab[r, -1] / col[r]
                if best is None or ratio < best[0] - tol or (abs(ratio - best[0]) <= tol and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            return False
        r = best[1]
        _pivot(tab, r, enter)
        basis[r] = enter


def maximize(c, G, h, tol: float = _TOL) -> LPResult:
    """``max c.x`` subject to ``G x <= h`` and ``x >= 0``.

    Raises :class:`Infeasible` for an empty region; an unbounded objective is
    reported through ``status`` with ``value = inf``.
    """
    c = np.asarray(c, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).reshape(-1)
    n = c.size
    m = h.size
    if G.shape != (m, n):
        raise ValueError(f"G must have shape ({m}, {n})")
    # rows can differ by dozens of orders of magnitude; equilibrate before pivoting
    norm = np.max(np.abs(G), axis=1) if n else np.zeros(m)
    norm = np.where(norm > 0, norm, 1.0)
    G = G / norm[:, None]
    h = h / norm
    neg = h < 0
    n_art = int(neg.sum())
    width = n + m + n_art
    tab = np.zeros((m + 1, width + 1))
    tab[:m, :n] = G
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = h
    tab[:m][neg] *= -1.0
    basis: list[int] = []
    art = n + m
    for r in range(m):
        if neg[r]:
            tab[r, art] = 1.0
            basis.append(art)
            art += 1
        else:
            basis.append(n + r)

    if n_art:
        # phase 1: maximize -sum(artificials)
        tab[-1, n + m : width] = 1.0
        for r in range(m):
            if neg[r]:
                tab[-1] -= tab[r]
        _run(tab, basis, width, tol)
        if tab[-1, -1] < -tol * max(1.0, float(np.max(np.abs(h)))):
            raise Infeasible("linear constraints have no nonnegative solution")
        for r in range(m):
            if basis[r] >= n + m:
                cand = np.flatnonzero(np.abs(tab[r, : n + m]) > tol)
                if cand.size:
                    _pivot(tab, r, int(cand[0]))
                    basis[r] = int(cand[0])
        tab = np.delete(tab, np.s_[n + m : width], axis=1)
        keep = [r for r in range(m) if basis[r] < n + m]
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[r] for r in keep]
        m = len(keep)
        width = n + h.size

    tab[-1] = 0.0
    tab[-1, :n] = -c
    for r in range(m):
        if basis[r] < n and c[basis[r]] != 0:
            tab[-1] += c[basis[r]] * tab[r]
    if not _run(tab, basis, width, tol):
        return LPResult("unbounded", np.full(n, np.nan), np.inf)
    x = np.zeros(width)
    for r in range(m):
        x[basis[r]] = tab[r, -1]
    x = x[:n]
    return LPResult("optimal", x, float(c @ x))


def minimize(c, G, h, tol: float = _TOL) -> LPResult:
    res = maximize(-np.asarray(c, dtype=float), G, h, tol)
    return LPResult(res.status, res.x, -res.value)
