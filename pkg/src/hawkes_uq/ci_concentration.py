"""Non-asymptotic confidence sets from martingale concentration of the score.

For a predictable direction process ``z(t)`` the quantity

    exp( int z(t) . dS_t(alpha*) - V(z, alpha*) )

is a mean-one martingale, where ``dS_t = eta/lambda (dN_t - lambda dt)`` and

    V(z, alpha) = int_0^T lambda (exp(z.eta / lambda) - 1 - z.eta / lambda) dt.

Markov's inequality plus a union bound over ``2D`` directions gives a level
``1 - eps`` set ``{alpha : g_k(alpha) <= ln(2D/eps) for all k}``.  The
directions are the columns of ``+-I^-1`` scaled as in the width-optimal
choice, with the information matrix estimated from the data seen so far so
that ``z`` stays predictable.  Per-entry intervals come from linearizing each
``g_k`` at the MLE and solving two small LPs per entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from hawkes_uq import lp
from hawkes_uq.ci_asymptotic import ConfidenceReport
from hawkes_uq.errors import Infeasible, KernelUnsupported
from hawkes_uq.kernels import Gamma
from hawkes_uq.likelihood import RANK_RTOL, node_stats
from hawkes_uq.mle import SolverOptions, fit_node
from hawkes_uq.process import EventSequence, as_row, eta_integral_matrix, eta_matrix

# exponent above which exp() is treated as overflow
OVERFLOW_EXPONENT = 700.0
V_RTOL = 1e-8
MIN_LEVEL = 1
MAX_LEVEL = 12
FD_REL_STEP = 1e-5
DEGENERATE_GRAD = 1e-12


def log_threshold(D: int, epsilon: float) -> float:
    """``ln(2D / eps)``, the per-direction bound of the adapted set."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.log(2.0 * D / epsilon)


@dataclass(frozen=True)
class DirectionSchedule:
    """Piecewise-constant direction path for one of the ``2D`` bounds.

    Segment ``s`` covers ``(starts[s], starts[s+1]]`` (the last one ends at
    ``T``) and carries direction ``z[s]``.
    """

    sign: int
    axis: int
    starts: np.ndarray
    z: np.ndarray
    T: float

    def segment_of(self, t):
        idx = np.searchsorted(self.starts, t, side="left") - 1
        return np.clip(idx, 0, self.starts.size - 1)

    def z_at(self, t):
        return self.z[self.segment_of(t)]

    def ends(self) -> np.ndarray:
        return np.append(self.starts[1:], self.T)

    @classmethod
    def constant(cls, z, T: float, sign: int = 1, axis: int = 0) -> "DirectionSchedule":
        z = np.asarray(z, dtype=float).reshape(1, -1)
        return cls(sign, axis, np.zeros(1), z, float(T))


@dataclass
class Polyhedron:
    """``{alpha >= 0 : G alpha <= h}``; row ``k`` is the linearized bound ``k``."""

    G: np.ndarray
    h: np.ndarray
    node: int = 0
    alpha_hat: np.ndarray | None = None
    g_values: np.ndarray | None = None
    gradients: np.ndarray | None = None
    directions: list[tuple[int, int]] = field(default_factory=list)
    dropped: list[dict] = field(default_factory=list)

    @property
    def D(self) -> int:
        return self.G.shape[1]

    def contains(self, alpha, tol: float = 1e-9) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < -tol):
            return False
        if self.G.shape[0] == 0:
            return True
        slack = self.h - self.G @ alpha
        return bool(np.all(slack >= -tol * np.maximum(1.0, np.abs(self.h))))

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "G": self.G.tolist(),
            "h": self.h.tolist(),
            "directions": [{"axis": a, "sign": s} for a, s in self.directions],
            "dropped": list(self.dropped),
        }


# --------------------------------------------------------------------------
# cached per-node geometry


def _check_row(row):
    for k in row:
        if isinstance(k, Gamma) and k.k < 1.0:
            raise KernelUnsupported("gamma kernels with shape < 1 are singular at lag 0; V integrand is unbounded")


class _Intervals:
    """Inter-event intervals of a sequence and excitation values on Simpson grids."""

    def __init__(self, seq: EventSequence, row, extra=()):
        pts = np.unique(np.concatenate([[0.0, seq.T], seq.times, np.asarray(extra, dtype=float)]))
        pts = pts[(pts >= 0) & (pts <= seq.T)]
        self.a = pts[:-1]
        self.b = pts[1:]
        self.seq = seq
        self.row = row
        self._levels: dict[int, np.ndarray] = {}

    def eta(self, level: int) -> np.ndarray:
        """Excitation at ``2**level + 1`` equispaced points per interval.

        Interior points and the left end use the right limit (event at ``a``
        included); the right end uses the strict past.  Shape ``(n, m, D)``.
        """
        got = self._levels.get(level)
        if got is None:
            N = 2**level
            frac = np.arange(N) / N
            q = self.a[:, None] + (self.b - self.a)[:, None] * frac[None, :]
            inner = eta_matrix(self.seq, self.row, q.ravel(), inclusive=True).reshape(q.shape + (-1,))
            end = eta_matrix(self.seq, self.row, self.b, inclusive=False)[:, None, :]
            got = np.concatenate([inner, end], axis=1)
            if len(self._levels) > 4:
                self._levels.pop(min(self._levels))
            self._levels[level] = got
        return got


def _intervals(seq: EventSequence, row) -> _Intervals:
    key = ("intervals", row)
    iv = seq._cache.get(key)
    if iv is None:
        iv = _Intervals(seq, row)
        seq._cache[key] = iv
    return iv


def _excess(u: np.ndarray) -> np.ndarray:
    """``exp(u) - 1 - u`` without cancellation near 0."""
    small = np.abs(u) < 1e-3
    series = u * u * (0.5 + u * (1.0 / 6.0 + u / 24.0))
    with np.errstate(over="ignore"):
        direct = np.expm1(u) - u
    return np.where(small, series, direct)


def _simpson_weights(level: int) -> np.ndarray:
    N = 2**level
    w = np.ones(N + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * N)


class VResult(NamedTuple):
    values: np.ndarray  # (K,) V per direction, +inf where the exponent overflowed
    level: int
    converged: np.ndarray  # (K,)
    overflow: np.ndarray  # (K,)


def _v_at_level(iv: _Intervals, Zint: np.ndarray, alpha, mu, level: int):
    """Simpson estimate for each of K directions. ``Zint`` is ``(K, n_int, D)``."""
    P = iv.eta(level)
    lam = mu + P @ alpha  # (n, m)
    zeta = np.einsum("nmd,knd->knm", P, Zint)
    u = zeta / lam[None]
    over = np.any(u > OVERFLOW_EXPONENT, axis=(1, 2))
    f = lam[None] * _excess(np.minimum(u, OVERFLOW_EXPONENT))
    h = iv.b - iv.a
    vals = (f @ _simpson_weights(level)) @ h
    vals = np.where(over, np.inf, vals)
    return vals, over


def _v_integral(iv: _Intervals, Zint, alpha, mu, level=None) -> VResult:
    K = Zint.shape[0]
    if level is not None:
        vals, over = _v_at_level(iv, Zint, alpha, mu, level)
        return VResult(vals, level, np.ones(K, bool), over)
    prev, over = _v_at_level(iv, Zint, alpha, mu, MIN_LEVEL)
    L = MIN_LEVEL
    while True:
        L += 1
        cur, over = _v_at_level(iv, Zint, alpha, mu, L)
        with np.errstate(invalid="ignore"):
            done = over | (np.abs(cur - prev) <= V_RTOL * np.abs(cur)) | (cur == prev)
        if np.all(done) or L >= MAX_LEVEL:
            return VResult(cur, L, done, over)
        prev = cur


# --------------------------------------------------------------------------
# adapted schedules


class _Schedules(NamedTuple):
    starts: np.ndarray  # (n_seg,)
    Z: np.ndarray  # (2D, n_seg, D); k = 2j for +e_j, 2j+1 for -e_j
    identity_fallback: np.ndarray  # (n_seg,) rank-deficient estimate replaced by I


def _schedules(st, alpha, mu, epsilon, T) -> _Schedules:
    D = st.eta.shape[1]
    te = st.times
    inside = te[te < T]
    starts = np.concatenate([[0.0], inside])
    n_seg = starts.size
    lam = mu + st.eta @ alpha
    Wm = st.eta / lam[:, None]
    cum = np.cumsum(Wm[:, :, None] * Wm[:, None, :], axis=0)  # (n_i, D, D)
    est = np.empty((n_seg, D, D))
    est[0] = np.eye(D)
    if n_seg > 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            est[1:] = cum[: n_seg - 1] / starts[1:, None, None]
    ev = np.linalg.eigvalsh(est)
    fallback = ~np.all(np.isfinite(est), axis=(1, 2))
    fallback |= (ev[:, -1] <= 0) | (ev[:, 0] < RANK_RTOL * ev[:, -1])
    fallback[0] = True
    est[fallback] = np.eye(D)
    inv = np.linalg.inv(est)
    bound = 2.0 * log_threshold(D, epsilon)
    Z = np.empty((2 * D, n_seg, D))
    for j in range(D):
        col = inv[:, :, j]
        scale = np.sqrt(bound / (T * inv[:, j, j]))
        Z[2 * j] = scale[:, None] * col
        Z[2 * j + 1] = -Z[2 * j]
    return _Schedules(starts, Z, fallback)


def build_schedule(seq: EventSequence, i: int, alpha, mu_i: float, kernels, epsilon: float, T: float | None = None):
    """The ``2D`` adapted direction schedules evaluated at ``alpha``.

    On the segment after each node-``i`` event, ``z`` uses the information
    estimate accumulated over events up to and including that event, divided
    by its time; before the first event the estimate is the identity.
    Returned in the order ``+e_0, -e_0, +e_1, ...``.
    """
    row = as_row(kernels, seq.D)
    T = seq.T if T is None else float(T)
    st = node_stats(seq, i, row)
    sch = _schedules(st, np.asarray(alpha, float), float(mu_i), epsilon, T)
    out = []
    for k in range(2 * seq.D):
        out.append(DirectionSchedule(1 if k % 2 == 0 else -1, k // 2, sch.starts, sch.Z[k], T))
    return out


# --------------------------------------------------------------------------
# the two terms of g_k


def pair_score(schedule: DirectionSchedule, alpha, seq: EventSequence, i: int, mu_i: float, kernels) -> float:
    """``int_0^T z(t) . dS_t(alpha)``: event sum minus the exact drift integral."""
    row = as_row(kernels, seq.D)
    alpha = np.asarray(alpha, dtype=float)
    st = node_stats(seq, i, row)
    lam = mu_i + st.eta @ alpha
    ze = schedule.z_at(st.times) if st.times.size else np.zeros((0, seq.D))
    jump = float(np.sum(np.einsum("nd,nd->n", ze, st.eta) / lam)) if st.times.size else 0.0
    bounds = np.append(schedule.starts, schedule.T)
    E = eta_integral_matrix(seq, row, bounds)
    drift = float(np.einsum("sd,sd->", schedule.z, np.diff(E, axis=0)))
    return jump - drift


def v_integral(schedule: DirectionSchedule, alpha, seq: EventSequence, i: int, mu_i: float, kernels, level=None) -> float:
    """Intrinsic-variance integral ``V`` for one schedule; ``+inf`` on overflow."""
    row = as_row(kernels, seq.D)
    _check_row(row)
    alpha = np.asarray(alpha, dtype=float)
    extra = schedule.starts[1:]
    iv = _intervals(seq, row) if np.all(np.isin(extra, seq.times)) else _Intervals(seq, row, extra)
    seg = schedule.segment_of(iv.b)
    Zint = schedule.z[seg][None]
    return float(_v_integral(iv, Zint, alpha, float(mu_i), level).values[0])


class GEval(NamedTuple):
    g: np.ndarray  # (2D,)
    pair: np.ndarray
    V: np.ndarray
    level: int
    overflow: np.ndarray
    identity_fallback_segments: int


def g_all(alpha, seq: EventSequence, i: int, mu_i: float, kernels, epsilon: float, level=None) -> GEval:
    """All ``2D`` statistics ``g_k(alpha)`` with schedules rebuilt at ``alpha``."""
    row = as_row(kernels, seq.D)
    _check_row(row)
    alpha = np.asarray(alpha, dtype=float)
    mu_i = float(mu_i)
    st = node_stats(seq, i, row)
    T = seq.T
    sch = _schedules(st, alpha, mu_i, epsilon, T)
    K = sch.Z.shape[0]
    # event e lies in segment e
    lam = mu_i + st.eta @ alpha
    n = st.times.size
    if n:
        jump = np.einsum("knd,nd->k", sch.Z[:, :n], st.eta / lam[:, None])
    else:
        jump = np.zeros(K)
    bounds = np.append(sch.starts, T)
    key = ("seg_integrals", int(i), row)
    dE = seq._cache.get(key)
    if dE is None:
        dE = np.diff(eta_integral_matrix(seq, row, bounds), axis=0)
        seq._cache[key] = dE
    drift = np.einsum("ksd,sd->k", sch.Z, dE)
    pair = jump - drift
    iv = _intervals(seq, row)
    seg = np.clip(np.searchsorted(sch.starts, iv.b, side="left") - 1, 0, sch.starts.size - 1)
    vr = _v_integral(iv, sch.Z[:, seg], alpha, mu_i, level)
    g = np.where(vr.overflow, -np.inf, pair - vr.values)
    return GEval(g, pair, vr.values, vr.level, vr.overflow, int(sch.identity_fallback.sum()))


def g(k: int, alpha, seq: EventSequence, i: int, mu_i: float, kernels, epsilon: float) -> float:
    """``g_k(alpha)``; ``-inf`` when the V integrand overflows (bound trivially met)."""
    return float(g_all(alpha, seq, i, mu_i, kernels, epsilon).g[k])


def exact_membership(alpha, seq: EventSequence, i: int, mu_i: float, kernels, epsilon: float) -> bool:
    """True iff every ``g_k(alpha) <= ln(2D/eps)``."""
    vals = g_all(alpha, seq, i, mu_i, kernels, epsilon).g
    return bool(np.all(vals <= log_threshold(seq.D, epsilon)))


# --------------------------------------------------------------------------
# fixed-direction sets (directions chosen without looking at the data)


def fixed_z_statistic(z, alpha, seq: EventSequence, i: int, mu_i: float, kernels, level=None) -> float:
    """``z . S(alpha) - V(z, alpha)`` for a constant direction ``z``."""
    sch = DirectionSchedule.constant(z, seq.T)
    v = v_integral(sch, alpha, seq, i, mu_i, kernels, level=level)
    if math.isinf(v):
        return -math.inf
    return pair_score(sch, alpha, seq, i, mu_i, kernels) - v


def fixed_z_membership(zs, alpha, seq: EventSequence, i: int, mu_i: float, kernels, epsilon: float) -> bool:
    """Membership in the K-direction set ``{z_k . S - V(z_k) <= ln(K/eps)}``."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    thr = math.log(zs.shape[0] / epsilon)
    return all(fixed_z_statistic(z, alpha, seq, i, mu_i, kernels) <= thr for z in zs)


def optimal_directions(fisher, T: float, epsilon: float) -> np.ndarray:
    """Width-optimal ``2D`` directions ``+-sqrt(2 ln(2D/eps) / (T s_jj)) I^-1 e_j`` for known information."""
    inv = np.linalg.inv(np.asarray(fisher, dtype=float))
    D = inv.shape[0]
    bound = 2.0 * log_threshold(D, epsilon)
    out = np.empty((2 * D, D))
    for j in range(D):
        z = math.sqrt(bound / (T * inv[j, j])) * inv[:, j]
        out[2 * j] = z
        out[2 * j + 1] = -z
    return out


# --------------------------------------------------------------------------
# linearized set and per-entry intervals


def g_gradient(alpha_hat, seq, i, mu_i, kernels, epsilon, level: int, rel_step: float = FD_REL_STEP):
    """Finite-difference Jacobian of all ``g_k`` at ``alpha_hat``, shape ``(2D, D)``.

    Central differences with step ``rel_step * (1 + alpha_j)``; coordinates too
    close to 0 for a backward step use the second-order forward formula.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    D = alpha_hat.size
    J = np.empty((2 * D, D))
    base = None
    for j in range(D):
        h = rel_step * (1.0 + alpha_hat[j])
        e = np.zeros(D)
        e[j] = h
        if alpha_hat[j] >= h:
            gp = g_all(alpha_hat + e, seq, i, mu_i, kernels, epsilon, level).g
            gm = g_all(alpha_hat - e, seq, i, mu_i, kernels, epsilon, level).g
            J[:, j] = (gp - gm) / (2 * h)
        else:
            if base is None:
                base = g_all(alpha_hat, seq, i, mu_i, kernels, epsilon, level).g
            g1 = g_all(alpha_hat + e, seq, i, mu_i, kernels, epsilon, level).g
            g2 = g_all(alpha_hat + 2 * e, seq, i, mu_i, kernels, epsilon, level).g
            J[:, j] = (-3 * base + 4 * g1 - g2) / (2 * h)
    return J


def polyhedral_set(alpha_hat, seq: EventSequence, i: int, mu_i: float, kernels, epsilon: float) -> Polyhedron:
    """Linearize every ``g_k`` at ``alpha_hat``: ``g_k + (alpha - alpha_hat) . g'_k <= ln(2D/eps)``.

    Rows whose gradient vanishes (``||g'_k|| < 1e-12``) or whose statistic
    overflowed are dropped and logged in ``dropped``.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    D = alpha_hat.size
    thr = log_threshold(D, epsilon)
    base = g_all(alpha_hat, seq, i, mu_i, kernels, epsilon)
    J = g_gradient(alpha_hat, seq, i, mu_i, kernels, epsilon, base.level)
    rows, rhs, dirs, dropped = [], [], [], []
    for k in range(2 * D):
        direction = (k // 2, 1 if k % 2 == 0 else -1)
        if not np.isfinite(base.g[k]):
            dropped.append({"row": k, "reason": "overflow"})
            continue
        grad = J[k]
        if not np.all(np.isfinite(grad)):
            dropped.append({"row": k, "reason": "nonfinite_gradient"})
            continue
        if np.linalg.norm(grad) < DEGENERATE_GRAD:
            dropped.append({"row": k, "reason": "degenerate_gradient"})
            continue
        rows.append(grad)
        rhs.append(thr - base.g[k] + grad @ alpha_hat)
        dirs.append(direction)
    G = np.array(rows).reshape(-1, D)
    h = np.array(rhs, dtype=float)
    return Polyhedron(G, h, node=int(i), alpha_hat=alpha_hat, g_values=base.g, gradients=J, directions=dirs, dropped=dropped)


class EntryCI(NamedTuple):
    lo: float
    hi: float
    unbounded: bool
    argmin: np.ndarray
    argmax: np.ndarray


def entry_ci(poly: Polyhedron, j: int) -> EntryCI:
    """Range of ``alpha_j`` over the polyhedron (intersected with ``alpha >= 0``).

    ``hi`` is ``inf`` with ``unbounded=True`` when the LP is unbounded; an
    empty polyhedron raises :class:`Infeasible`.
    """
    D = poly.D
    c = np.zeros(D)
    c[j] = 1.0
    G, h = poly.G, poly.h
    if G.shape[0] == 0:
        G = np.zeros((1, D))
        h = np.zeros(1)
    low = lp.minimize(c, G, h)
    high = lp.maximize(c, G, h)
    if high.status == "unbounded":
        return EntryCI(float(low.value), math.inf, True, low.x, high.x)
    return EntryCI(float(low.value), float(high.value), False, low.x, high.x)


def concentration_ci(
    seq: EventSequence,
    i: int,
    mu_i: float,
    kernels,
    epsilon: float,
    opts: SolverOptions | None = None,
    alpha_hat=None,
    check_endpoints: bool = False,
) -> ConfidenceReport:
    """Fit, linearize, and extract per-entry intervals for node ``i``."""
    D = seq.D
    row = as_row(kernels, D)
    fit_diag = None
    if alpha_hat is None:
        alpha_hat, fit_diag = fit_node(seq, i, mu_i, row, opts)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    poly = polyhedral_set(alpha_hat, seq, i, mu_i, row, epsilon)
    lo = np.full(D, np.nan)
    hi = np.full(D, np.nan)
    flags: dict = {"unbounded": [], "linearization_failed": [], "dropped_rows": [], "mle_outside_set": []}
    diagnostics: dict = {"endpoint_membership": [], "polyhedra": [poly.to_dict()]}
    for d in poly.dropped:
        flags["dropped_rows"].append({"node": int(i), **d})
    if not poly.contains(alpha_hat):
        flags["mle_outside_set"].append(int(i))
    vertices = []
    try:
        for j in range(D):
            res = entry_ci(poly, j)
            lo[j], hi[j] = res.lo, res.hi
            if res.unbounded:
                flags["unbounded"].append([int(i), j])
            vertices.append((j, "lo", res.argmin))
            if not res.unbounded:
                vertices.append((j, "hi", res.argmax))
    except Infeasible:
        flags["linearization_failed"].append(int(i))
        lo[:] = np.nan
        hi[:] = np.nan
        vertices = []
    if check_endpoints:
        for j, side, x in vertices:
            ok = exact_membership(np.maximum(x, 0.0), seq, i, mu_i, row, epsilon)
            diagnostics["endpoint_membership"].append({"node": int(i), "j": j, "side": side, "member": ok})
    if fit_diag is not None:
        diagnostics["fit"] = [fit_diag.to_dict()]
    return ConfidenceReport(
        method="concentration",
        epsilon=epsilon,
        rows=[int(i)],
        point=alpha_hat[None, :],
        lo=lo[None, :],
        hi=hi[None, :],
        flags=flags,
        diagnostics=diagnostics,
    )
