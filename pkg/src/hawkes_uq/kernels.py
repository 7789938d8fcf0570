"""Influence kernels and their cumulative integrals.

Every kernel is supported on ``[0, inf)``; evaluation at negative lags
returns 0.  All three families are vectorized over the lag argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np
from scipy import special


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"kernel parameter {name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class Exponential:
    """``beta * exp(-beta * dt)``, unit mass."""

    beta: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))

    @property
    def monotone(self) -> bool:
        return True

    def evaluate(self, dt):
        dt = np.asarray(dt, dtype=float)
        safe = np.where(dt >= 0, dt, 0.0)
        return np.where(dt >= 0, self.beta * np.exp(-self.beta * safe), 0.0)

    def cumulative(self, dt):
        dt = np.maximum(np.asarray(dt, dtype=float), 0.0)
        return -np.expm1(-self.beta * dt)

    def total_mass(self) -> float:
        return 1.0

    def supremum(self, lo, hi):
        """Upper bound of the kernel over lags in ``[lo, hi]`` (elementwise)."""
        return self.evaluate(np.maximum(np.asarray(lo, dtype=float), 0.0))

    def to_dict(self) -> dict:
        return {"type": "exponential", "beta": self.beta}


@dataclass(frozen=True)
class Gamma:
    """Gamma density with shape ``k`` and rate ``beta``.

    ``beta**k * dt**(k-1) * exp(-beta*dt) / Gamma(k)``.  With ``k = 1`` this is
    exactly :class:`Exponential` with the same ``beta``.
    """

    k: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "k", _check_positive("k", self.k))
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))

    @property
    def monotone(self) -> bool:
        return self.k <= 1.0

    def evaluate(self, dt):
        dt = np.asarray(dt, dtype=float)
        if self.k == 1.0:
            safe = np.where(dt >= 0, dt, 0.0)
            return np.where(dt >= 0, self.beta * np.exp(-self.beta * safe), 0.0)
        x = self.beta * np.where(dt > 0, dt, 1.0)
        logpdf = (self.k - 1.0) * np.log(x) - x - special.gammaln(self.k) + math.log(self.beta)
        out = np.where(dt > 0, np.exp(logpdf), 0.0)
        if self.k < 1.0:
            return np.where(dt == 0, np.inf, out)
        return out

    def cumulative(self, dt):
        dt = np.maximum(np.asarray(dt, dtype=float), 0.0)
        return special.gammainc(self.k, self.beta * dt)

    def total_mass(self) -> float:
        return 1.0

    def supremum(self, lo, hi):
        lo = np.maximum(np.asarray(lo, dtype=float), 0.0)
        hi = np.maximum(np.asarray(hi, dtype=float), lo)
        if self.k <= 1.0:
            return self.evaluate(lo)
        mode = (self.k - 1.0) / self.beta
        return self.evaluate(np.clip(mode, lo, hi))

    def to_dict(self) -> dict:
        return {"type": "gamma", "k": self.k, "beta": self.beta}


@dataclass(frozen=True)
class Gaussian:
    """Delayed bump ``exp(-beta*(dt-tau)**2/sigma) / sqrt(2*pi*sigma)`` for ``dt >= 0``.

    The formula is kept as written, so the total mass is generally not 1;
    see :meth:`total_mass`.
    """

    tau: float
    sigma: float
    beta: float

    def __post_init__(self):
        tau = float(self.tau)
        if not math.isfinite(tau) or tau < 0:
            raise ValueError(f"kernel parameter tau must be finite and >= 0, got {tau!r}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", _check_positive("sigma", self.sigma))
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))

    @property
    def monotone(self) -> bool:
        return self.tau == 0.0

    @property
    def _c(self) -> float:
        return math.sqrt(self.beta / self.sigma)

    def evaluate(self, dt):
        dt = np.asarray(dt, dtype=float)
        val = np.exp(-self.beta * (dt - self.tau) ** 2 / self.sigma) / math.sqrt(2 * math.pi * self.sigma)
        return np.where(dt >= 0, val, 0.0)

    def cumulative(self, dt):
        # int_0^x exp(-c^2 (s - tau)^2) ds / sqrt(2 pi sigma)
        #   = [erf(c (x - tau)) + erf(c tau)] / (2 sqrt(2 beta))
        dt = np.maximum(np.asarray(dt, dtype=float), 0.0)
        c = self._c
        a = c * (dt - self.tau)
        b = c * self.tau
        # erfc form avoids cancellation while x is still left of the peak
        left = special.erfc(-a) - special.erfc(b)
        right = special.erf(a) + special.erf(b)
        val = np.where(a < 0, left, right)
        return val / (2.0 * math.sqrt(2.0 * self.beta))

    def total_mass(self) -> float:
        return (1.0 + math.erf(self._c * self.tau)) / (2.0 * math.sqrt(2.0 * self.beta))

    def supremum(self, lo, hi):
        lo = np.maximum(np.asarray(lo, dtype=float), 0.0)
        hi = np.maximum(np.asarray(hi, dtype=float), lo)
        return self.evaluate(np.clip(self.tau, lo, hi))

    def to_dict(self) -> dict:
        return {"type": "gaussian", "tau": self.tau, "sigma": self.sigma, "beta": self.beta}


KernelSpec = Union[Exponential, Gamma, Gaussian]


def evaluate(spec: KernelSpec, dt):
    """Kernel value at lag ``dt``; zero for negative lags."""
    return spec.evaluate(dt)


def cumulative(spec: KernelSpec, dt):
    """Integral of the kernel over ``[0, dt]``."""
    return spec.cumulative(dt)


def total_mass(spec: KernelSpec) -> float:
    return spec.total_mass()


def kernel_from_dict(obj: dict[str, Any]) -> KernelSpec:
    """Parse the ``{"type": ..., "beta": ...}`` JSON form."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("kernel must be an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "exponential":
            return Exponential(obj["beta"])
        if kind == "gamma":
            return Gamma(obj["k"], obj["beta"])
        if kind == "gaussian":
            return Gaussian(obj.get("tau", 0.0), obj["sigma"], obj["beta"])
    except KeyError as exc:
        raise ValueError(f"{kind} kernel is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown kernel type {kind!r}")


def kernel_to_dict(spec: KernelSpec) -> dict:
    return spec.to_dict()
