"""Tabular softmax policies, uniform-exploration mixtures, and rate schedules."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate


def softmax_policy(theta: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a ``(n_states, n_actions)`` parameter table."""
    theta = np.asarray(theta, dtype=float)
    if not np.isfinite(theta).all():
        raise ValueError("theta has non-finite entries")
    z = np.exp(theta - theta.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def exploration_policy(f: np.ndarray, eta: float) -> np.ndarray:
    """Mix ``f`` with the uniform action law: ``eta / d_A + (1 - eta) * f``.

    ``eta = 1`` is accepted (it occurs at time zero under the default schedule).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta={eta} outside [0, 1)")
    f = np.asarray(f, dtype=float)
    return eta / f.shape[-1] + (1.0 - eta) * f


def log_policy_gradient(theta: np.ndarray, x: int, a: int) -> np.ndarray:
    """Gradient of ``log f_theta(x, a)`` with respect to every entry of theta."""
    theta = np.asarray(theta, dtype=float)
    nx, na = theta.shape
    if not (0 <= x < nx and 0 <= a < na):
        raise IndexError(f"({x}, {a}) out of range for table of shape {theta.shape}")
    out = np.zeros_like(theta)
    out[x] = -softmax_policy(theta[x])
    out[x, a] += 1.0
    return out


def _nonneg(*args):
    for v in args:
        if v < 0:
            raise ValueError(f"negative argument {v}")


def zeta_cont(t: float) -> float:
    _nonneg(t)
    return 1.0 / (1.0 + t)


def eta_cont(t: float) -> float:
    _nonneg(t)
    return 1.0 / (1.0 + np.log1p(t) ** 2)


def zeta_discrete(k: int, N: int) -> float:
    _nonneg(k)
    if N < 1:
        raise ValueError("N must be >= 1")
    return zeta_cont(k / N)


def eta_discrete(k: int, N: int) -> float:
    _nonneg(k)
    if N < 1:
        raise ValueError("N must be >= 1")
    return eta_cont(k / N)


@dataclass(frozen=True)
class RateSchedule:
    """Learning rate ``zeta`` and exploration rate ``eta`` as functions of rescaled time.

    The discrete rates at step ``k`` with rescaling ``N`` are the continuous
    ones evaluated at ``t = k / N``, which is exact for the default schedule.
    """

    kind: str = "paper"
    zeta_fn: Callable[[float], float] = field(default=zeta_cont, repr=False)
    eta_fn: Callable[[float], float] = field(default=eta_cont, repr=False)

    def zeta(self, t: float) -> float:
        return self.zeta_fn(t)

    def eta(self, t: float) -> float:
        return self.eta_fn(t)

    def zeta_discrete(self, k: int, N: int) -> float:
        return self.zeta_fn(k / N)

    def eta_discrete(self, k: int, N: int) -> float:
        return self.eta_fn(k / N)

    @classmethod
    def default(cls) -> RateSchedule:
        return cls()

    @classmethod
    def constant(cls, zeta: float, eta: float) -> RateSchedule:
        """Frozen rates, for fixed-point and stationarity checks."""
        return cls("constant", lambda t: zeta, lambda t: eta)

    @classmethod
    def custom(cls, zeta_fn, eta_fn) -> RateSchedule:
        return cls("custom", zeta_fn, eta_fn)


def schedule_by_name(name: str) -> RateSchedule:
    if name == "paper":
        return RateSchedule.default()
    if name.startswith("constant:"):
        zeta, eta = (float(v) for v in name.split(":", 1)[1].split(","))
        return RateSchedule.constant(zeta, eta)
    raise ValueError(f"unknown schedule {name!r} (use 'paper' or 'constant:ZETA,ETA')")


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    value: float
    threshold: float


@dataclass
class PropertyReport:
    checks: list[PropertyCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def integrate_rate(fn, a: float, b: float) -> float:
    """Integral of a scalar rate function over ``[a, b]`` by adaptive quadrature."""
    # split on a log grid; the integrands vary over many decades
    edges = np.unique(np.concatenate([[a], np.geomspace(max(a, 1.0), b, 32), [b]]))
    edges = edges[(edges >= a) & (edges <= b)]
    return sum(integrate.quad(fn, lo, hi, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:]))


def check_rate_properties(
    schedule: RateSchedule,
    horizon: float,
    powers=(1, 2, 4),
    tail_tol: float = 1e-2,
    growth_tol: float = 0.1,
) -> PropertyReport:
    """Check the four rate conditions numerically on ``[0, horizon]``.

    Divergence of the integral of zeta is read as a tail increment over
    ``[T/2, T]`` of at least ``growth_tol``; convergence of the integrals of
    zeta**2 and zeta*eta as a tail increment below ``tail_tol``. The ratio
    ``zeta / eta**n`` must decrease monotonically over the last decade and
    end below its value at ``T/10``.
    """
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    T = float(horizon)
    z, e = schedule.zeta, schedule.eta
    checks = []
    tail = integrate_rate(z, T / 2, T)
    checks.append(PropertyCheck("zeta_integral_diverges", tail >= growth_tol, tail, growth_tol))
    tail = integrate_rate(lambda t: z(t) ** 2, T / 2, T)
    checks.append(PropertyCheck("zeta_squared_integrable", tail <= tail_tol, tail, tail_tol))
    tail = integrate_rate(lambda t: z(t) * e(t), T / 2, T)
    checks.append(PropertyCheck("zeta_eta_integrable", tail <= tail_tol, tail, tail_tol))
    ts = np.geomspace(T / 10, T, 50)
    for n in powers:
        with np.errstate(divide="ignore"):
            ratio = np.array([z(t) / e(t) ** n for t in ts])
        ok = bool(np.all(np.diff(ratio) < 0) and ratio[-1] < ratio[0])
        checks.append(PropertyCheck(f"zeta_over_eta^{n}_vanishes", ok, float(ratio[-1]), float(ratio[0])))
    return PropertyReport(checks)
