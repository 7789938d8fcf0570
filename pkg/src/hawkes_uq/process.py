"""Event data model, intensity, excitation vector and compensator.

The history used at time ``t`` is always the strict past: an event at exactly
``t`` does not contribute to ``intensity(t)`` or ``eta(t)``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from hawkes_uq.kernels import Exponential, Gamma, KernelSpec, kernel_from_dict, kernel_to_dict

KernelRow = tuple  # tuple[KernelSpec, ...] of length D, kernels phi_{i,.} for one target node

# cap on the number of (query, event) pairs materialized at once by the brute-force path
_CHUNK = 2_000_000


class EventSequence:
    """Time-ordered marked events on ``[0, T]`` over ``D`` nodes.

    Ties in the input are broken by stable ordering and each repeated time is
    nudged up by one ulp; ``perturbed`` records whether that happened.
    """

    def __init__(self, times: Iterable[float], nodes: Iterable[int], T: float, D: int):
        times = np.asarray(list(times) if not isinstance(times, np.ndarray) else times, dtype=float)
        nodes = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.int64)
        if times.shape != nodes.shape or times.ndim != 1:
            raise ValueError("times and nodes must be 1-d arrays of equal length")
        T = float(T)
        D = int(D)
        if not T > 0:
            raise ValueError(f"horizon T must be > 0, got {T}")
        if D < 1:
            raise ValueError(f"node count D must be >= 1, got {D}")
        if times.size:
            if not np.all(np.isfinite(times)) or times.min() < 0 or times.max() > T:
                raise ValueError("event times must lie in [0, T]")
            if nodes.min() < 0 or nodes.max() >= D:
                raise ValueError("node indices must lie in [0, D)")
        order = np.argsort(times, kind="stable")
        times = times[order].copy()
        nodes = nodes[order].copy()
        perturbed = False
        for k in range(1, times.size):
            if times[k] <= times[k - 1]:
                times[k] = np.nextafter(times[k - 1], np.inf)
                perturbed = True
        if times.size and times[-1] > T:
            raise ValueError("tie-breaking pushed an event past the horizon")
        times.setflags(write=False)
        nodes.setflags(write=False)
        self._times = times
        self._nodes = nodes
        self._T = T
        self._D = D
        self.perturbed = perturbed
        self._by_node = tuple(_frozen(times[nodes == j]) for j in range(D))
        self._cache: dict = {}

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def T(self) -> float:
        return self._T

    @property
    def D(self) -> int:
        return self._D

    def __len__(self) -> int:
        return self._times.size

    def node_times(self, j: int) -> np.ndarray:
        """Sorted event times on node ``j``."""
        return self._by_node[j]

    def counts(self) -> np.ndarray:
        return np.array([t.size for t in self._by_node], dtype=np.int64)

    def with_horizon(self, T: float) -> "EventSequence":
        """Same events viewed on a different horizon (events beyond it dropped)."""
        keep = self._times <= T
        return EventSequence(self._times[keep], self._nodes[keep], T, self._D)

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return (
            self._T == other._T
            and self._D == other._D
            and np.array_equal(self._times, other._times)
            and np.array_equal(self._nodes, other._nodes)
        )

    __hash__ = object.__hash__

    def __repr__(self):
        return f"EventSequence(n={len(self)}, T={self._T}, D={self._D})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _kernel_grid(kernels, D: int) -> tuple:
    if hasattr(kernels, "evaluate"):
        return tuple(tuple(kernels for _ in range(D)) for _ in range(D))
    grid = tuple(tuple(row) for row in kernels)
    if len(grid) != D or any(len(row) != D for row in grid):
        raise ValueError(f"kernel grid must be {D}x{D}")
    return grid


@dataclass(frozen=True)
class ModelParams:
    """Background rates, influence matrix and kernel grid.

    ``kernels`` may be a single spec shared by every pair or a ``D x D`` grid
    where ``kernels[i][j]`` shapes the effect of node ``j`` on node ``i``.
    """

    mu: np.ndarray
    A: np.ndarray
    kernels: tuple = field(default=None)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        D = mu.size
        A = np.array(self.A, dtype=float).reshape(D, D)
        if D < 1:
            raise ValueError("mu must be non-empty")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ValueError("background rates mu must all be > 0")
        if not np.all(np.isfinite(A)) or np.any(A < 0):
            raise ValueError("influence matrix A must be finite and >= 0")
        kernels = self.kernels if self.kernels is not None else Exponential(1.0)
        mu.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "kernels", _kernel_grid(kernels, D))

    @property
    def D(self) -> int:
        return self.mu.size

    def kernel_row(self, i: int) -> KernelRow:
        return self.kernels[i]

    def branching_matrix(self) -> np.ndarray:
        mass = np.array([[k.total_mass() for k in row] for row in self.kernels])
        return self.A * mass

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix()))))

    @property
    def explosive(self) -> bool:
        """Warning flag: branching spectral radius >= 1."""
        return self.spectral_radius >= 1.0

    @property
    def shared_exponential_beta(self) -> float | None:
        """The common decay rate if every kernel is the same exponential, else None."""
        first = self.kernels[0][0]
        if not isinstance(first, Exponential):
            return None
        if all(k == first for row in self.kernels for k in row):
            return first.beta
        return None

    def to_dict(self) -> dict:
        return {
            "D": self.D,
            "mu": self.mu.tolist(),
            "A": self.A.tolist(),
            "kernels": [[kernel_to_dict(k) for k in row] for row in self.kernels],
        }


def kernels_from_json(obj, D: int) -> tuple:
    if isinstance(obj, dict):
        return _kernel_grid(kernel_from_dict(obj), D)
    if isinstance(obj, list):
        return _kernel_grid([[kernel_from_dict(k) for k in row] for row in obj], D)
    raise ValueError("kernels must be an object or a DxD array of objects")


# --------------------------------------------------------------------------
# vectorized history sums


def _exp_state(seq: EventSequence, j: int, beta: float) -> np.ndarray:
    """``R[k] = sum_{l <= k} exp(-beta (s_k - s_l))`` over events on node j."""
    key = ("exp_state", j, beta)
    R = seq._cache.get(key)
    if R is None:
        s = seq.node_times(j)
        R = np.empty(s.size)
        acc = 0.0
        decay = np.exp(-beta * np.diff(s, prepend=s[0] if s.size else 0.0))
        for k in range(s.size):
            acc = 1.0 + acc * decay[k]
            R[k] = acc
        seq._cache[key] = R
    return R


def _pairwise_sum(src: np.ndarray, q: np.ndarray, fn, inclusive: bool) -> np.ndarray:
    out = np.zeros(q.size)
    if src.size == 0 or q.size == 0:
        return out
    step = max(1, _CHUNK // src.size)
    for a in range(0, q.size, step):
        dt = q[a : a + step, None] - src[None, :]
        mask = dt >= 0 if inclusive else dt > 0
        vals = fn(np.where(mask, dt, 0.0))
        out[a : a + step] = np.where(mask, vals, 0.0).sum(axis=1)
    return out


def eta_matrix(seq: EventSequence, row: KernelRow, times, inclusive: bool = False) -> np.ndarray:
    """Excitation vectors at many query times, shape ``(len(times), D)``.

    Column ``j`` is ``sum phi_{ij}(t - s)`` over events ``s`` on node ``j`` with
    ``s < t`` (or ``s <= t`` when ``inclusive``, i.e. the right limit).
    """
    q = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.zeros((q.size, seq.D))
    side = "right" if inclusive else "left"
    for j, kern in enumerate(row):
        s = seq.node_times(j)
        if s.size == 0:
            continue
        if isinstance(kern, Exponential) or (isinstance(kern, Gamma) and kern.k == 1.0):
            beta = kern.beta
            R = _exp_state(seq, j, beta)
            idx = np.searchsorted(s, q, side=side) - 1
            valid = idx >= 0
            ii = np.where(valid, idx, 0)
            out[:, j] = np.where(valid, beta * R[ii] * np.exp(-beta * np.maximum(q - s[ii], 0.0)), 0.0)
        else:
            out[:, j] = _pairwise_sum(s, q, kern.evaluate, inclusive)
    return out


def eta_integral_matrix(seq: EventSequence, row: KernelRow, times) -> np.ndarray:
    """``int_0^t eta(u) du`` at each query time, shape ``(len(times), D)``."""
    q = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.zeros((q.size, seq.D))
    for j, kern in enumerate(row):
        s = seq.node_times(j)
        if s.size == 0:
            continue
        if isinstance(kern, Exponential) or (isinstance(kern, Gamma) and kern.k == 1.0):
            # sum (1 - exp(-beta (t - s))) = count - eta(t) / beta
            beta = kern.beta
            R = _exp_state(seq, j, beta)
            idx = np.searchsorted(s, q, side="left") - 1
            valid = idx >= 0
            ii = np.where(valid, idx, 0)
            decayed = np.where(valid, R[ii] * np.exp(-beta * np.maximum(q - s[ii], 0.0)), 0.0)
            out[:, j] = (idx + 1) - decayed
        else:
            out[:, j] = _pairwise_sum(s, q, kern.cumulative, inclusive=False)
    return out


def _check_node(i: int, D: int) -> int:
    if not 0 <= int(i) < D:
        raise IndexError(f"node index {i} out of range for D={D}")
    return int(i)


def eta(params: ModelParams, seq: EventSequence, i: int, t: float) -> np.ndarray:
    """Gradient of ``intensity(t)`` with respect to row ``i`` of ``A``."""
    i = _check_node(i, seq.D)
    return eta_matrix(seq, params.kernel_row(i), [t])[0]


def intensity(params: ModelParams, seq: EventSequence, i: int, t: float) -> float:
    """Conditional intensity of node ``i`` at ``t`` given the strict past."""
    i = _check_node(i, seq.D)
    return float(params.mu[i] + params.A[i] @ eta(params, seq, i, t))


def compensator(params: ModelParams, seq: EventSequence, i: int, t_end: float) -> float:
    """Exact ``int_0^{t_end} intensity_i(t) dt``."""
    i = _check_node(i, seq.D)
    integ = eta_integral_matrix(seq, params.kernel_row(i), [t_end])[0]
    return float(params.mu[i] * t_end + params.A[i] @ integ)


# --------------------------------------------------------------------------
# file formats


def manifest_path(events_path: str) -> str:
    root, _ = os.path.splitext(events_path)
    return root + ".manifest.json"


def write_events(seq: EventSequence, path: str) -> str:
    """Write ``time,node`` CSV plus the ``{"T", "D"}`` sidecar; returns the manifest path."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("time,node\n")
        for t, u in zip(seq.times, seq.nodes):
            fh.write(f"{t:.17g},{int(u)}\n")
    mpath = manifest_path(path)
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump({"T": seq.T, "D": seq.D}, fh)
        fh.write("\n")
    return mpath


def read_events(path: str, T: float | None = None, D: int | None = None) -> EventSequence:
    """Read the CSV event format; ``T``/``D`` default to the sidecar manifest."""
    mpath = manifest_path(path)
    if os.path.exists(mpath):
        with open(mpath, encoding="utf-8") as fh:
            man = json.load(fh)
        T = man["T"] if T is None else T
        D = man["D"] if D is None else D
    if T is None or D is None:
        raise ValueError(f"no manifest at {mpath} and T/D not supplied")
    times: list[float] = []
    nodes: list[int] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return EventSequence([], [], T, D)
        if [h.strip() for h in header] != ["time", "node"]:
            raise ValueError(f"{path}: expected header 'time,node', got {','.join(header)!r}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                times.append(float(rec[0]))
                nodes.append(int(rec[1]))
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed row {rec!r}") from None
    return EventSequence(times, nodes, T, D)


def as_row(kernels: Sequence[KernelSpec] | KernelSpec, D: int) -> KernelRow:
    """Normalize a single spec or a length-D sequence into a kernel row."""
    if hasattr(kernels, "evaluate"):
        return tuple(kernels for _ in range(D))
    row = tuple(kernels)
    if len(row) != D:
        raise ValueError(f"kernel row must have length {D}")
    if not all(hasattr(k, "evaluate") for k in row):
        raise TypeError("expected one kernel spec or a row of them, not a grid")
    return row
