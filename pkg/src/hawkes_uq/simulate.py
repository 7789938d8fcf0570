"""Synthetic event sequences by thinning.

Random streams come from numpy's PCG64 generator seeded through
``SeedSequence``; replication ``r`` of a batch uses ``child_seed(seed, r)``,
a hash of the pair, so any replication can be regenerated on its own.
"""

from __future__ import annotations

import numpy as np

from hawkes_uq.errors import ExplosiveProcess, KernelUnsupported, RateBoundViolation
from hawkes_uq.kernels import Exponential, Gamma
from hawkes_uq.parallel import parallel_map
from hawkes_uq.process import EventSequence, ModelParams

# relative slack when checking the majorant against the exact intensity
_BOUND_RTOL = 1e-9
# general-kernel lookahead: this many mean waiting times at the current bound
_WINDOW_SCALE = 3.0


def child_seed(seed: int, r: int) -> int:
    """Deterministic 64-bit seed for replication ``r`` of a batch."""
    if seed < 0 or r < 0:
        raise ValueError("seed and replication index must be nonnegative")
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0])


def _is_exp(k) -> bool:
    return isinstance(k, Exponential) or (isinstance(k, Gamma) and k.k == 1.0)


def _check(params: ModelParams, T: float):
    if not T > 0:
        raise ValueError("horizon must be > 0")
    rho = params.spectral_radius
    if rho >= 1.0:
        raise ExplosiveProcess(f"branching spectral radius {rho:.6g} >= 1")
    for row in params.kernels:
        for k in row:
            if isinstance(k, Gamma) and k.k < 1.0:
                raise KernelUnsupported("gamma kernels with shape < 1 are unbounded at lag 0 and cannot be thinned")


def simulate(params: ModelParams, T: float, seed: int) -> EventSequence:
    """One realization on ``[0, T]`` (deterministic in ``seed``)."""
    _check(params, T)
    rng = np.random.default_rng(seed)
    if all(_is_exp(k) for row in params.kernels for k in row):
        times, nodes = _thin_exponential(params, T, rng)
    else:
        times, nodes = _thin_general(params, T, rng)
    return EventSequence(np.array(times), np.array(nodes, dtype=np.int64), T, params.D)


def simulate_many(params: ModelParams, T: float, n_reps: int, seed: int, workers=None) -> list[EventSequence]:
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    _check(params, T)
    jobs = [(params, T, child_seed(seed, r)) for r in range(n_reps)]
    return parallel_map(_simulate_job, jobs, workers=workers)


def _simulate_job(job):
    return simulate(*job)


def _thin_exponential(params: ModelParams, T: float, rng):
    # with decreasing kernels the intensity just after the last event bounds
    # every later intensity until the next event
    mu = params.mu
    D = params.D
    beta = np.array([[k.beta for k in row] for row in params.kernels])
    weight = params.A * beta
    state = np.zeros((D, D))  # sum over past events on j of exp(-beta_ij (t - s))
    t = 0.0
    times: list[float] = []
    nodes: list[int] = []
    lam = mu.copy()
    while True:
        bound = float(lam.sum())
        t_new = t + rng.exponential(1.0 / bound)
        if t_new > T:
            break
        state *= np.exp(-beta * (t_new - t))
        t = t_new
        lam = mu + (weight * state).sum(axis=1)
        total = float(lam.sum())
        if total > bound * (1.0 + _BOUND_RTOL):
            raise RateBoundViolation(f"intensity {total} exceeds majorant {bound} at t={t}")
        if rng.random() * bound <= total:
            u = int(np.searchsorted(np.cumsum(lam), rng.random() * total, side="right"))
            u = min(u, D - 1)
            times.append(t)
            nodes.append(u)
            state[:, u] += 1.0
            lam = mu + (weight * state).sum(axis=1)
    return times, nodes


def _thin_general(params: ModelParams, T: float, rng):
    mu = params.mu
    D = params.D
    A = params.A
    grid = params.kernels
    hist: list[list[float]] = [[] for _ in range(D)]
    times: list[float] = []
    nodes: list[int] = []

    def rates(t):
        lam = mu.copy()
        for j in range(D):
            if not hist[j]:
                continue
            dt = t - np.asarray(hist[j])
            for i in range(D):
                if A[i, j] > 0:
                    lam[i] += A[i, j] * float(np.sum(grid[i][j].evaluate(np.where(dt > 0, dt, -1.0))))
        return lam

    def majorant(t, w):
        total = float(mu.sum())
        for j in range(D):
            if not hist[j]:
                continue
            dt = t - np.asarray(hist[j])
            for i in range(D):
                if A[i, j] > 0:
                    total += A[i, j] * float(np.sum(grid[i][j].supremum(dt, dt + w)))
        return total

    t = 0.0
    while t < T:
        point = majorant(t, 0.0)
        w = _WINDOW_SCALE / point
        bound = majorant(t, w)
        e = rng.exponential(1.0 / bound)
        if e >= w:
            t += w
            continue
        t += e
        if t > T:
            break
        lam = rates(t)
        total = float(lam.sum())
        if total > bound * (1.0 + _BOUND_RTOL):
            raise RateBoundViolation(f"intensity {total} exceeds majorant {bound} at t={t}")
        if rng.random() * bound <= total:
            u = int(np.searchsorted(np.cumsum(lam), rng.random() * total, side="right"))
            u = min(u, D - 1)
            times.append(t)
            nodes.append(u)
            hist[u].append(t)
    return times, nodes
