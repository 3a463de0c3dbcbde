"""Dense linear-algebra ground truth for finite MDPs and their Markov chains.

Every quantity here is computed by a direct solve (LU with partial pivoting),
never by simulation, so these functions serve as oracles for the stochastic
and ODE code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .mdp import ErgodicityError, MdpSpec, StateActionKernel, check_ergodicity
from .policy import softmax_policy

GREEDY_TOL = 1e-9


@dataclass(frozen=True)
class ValuePair:
    v_state: np.ndarray
    v_state_action: np.ndarray


@dataclass(frozen=True)
class VisitingMeasures:
    """Discounted occupancy measures started from ``mu``.

    ``nu`` and ``sigma`` have total mass ``1 / (1 - gamma)``;
    ``sigma_normalized`` is ``(1 - gamma) * sigma`` and sums to one.
    """

    nu: np.ndarray
    sigma: np.ndarray
    sigma_normalized: np.ndarray


@dataclass(frozen=True)
class LojasiewiczReport:
    grad_norm: float
    rhs_unique: float
    rhs_general: float
    distribution_mismatch: float
    min_optimal_mass: float
    min_greedy_mass: float
    gap: float

    @property
    def holds(self) -> bool:
        slack = 1e-12 * max(1.0, self.grad_norm)
        return self.grad_norm + slack >= max(self.rhs_unique, self.rhs_general)


@dataclass(frozen=True)
class MixingProfile:
    """Worst-case total-variation distance to stationarity after ``n`` steps.

    ``d[n]`` for ``n = 0..n_max``; ``rate`` and ``prefactor`` fit
    ``d(n) ~ prefactor * rate**n`` on the window where ``d`` lies in
    ``[1e-12, 1e-2]``. With fewer than three points in that window the rate
    is the smallest ``rho`` with ``d(n) <= rho**n`` for all ``n >= 1`` (0 for
    chains that mix exactly) and ``r_squared`` is NaN.
    """

    d: np.ndarray
    rate: float
    prefactor: float
    r_squared: float
    fit_window: tuple[int, int]
    min_stationary_mass: float


def state_transition(spec: MdpSpec, f: np.ndarray) -> np.ndarray:
    """``P_f(x, x') = sum_a f(x, a) p(x'|x, a)``."""
    return np.einsum("xa,xay->xy", f, spec.p)


def _require_ergodic(kernel):
    rep = check_ergodicity(kernel)
    if not rep.ergodic:
        raise ErgodicityError(
            f"kernel is not ergodic (irreducible={rep.irreducible}, period={rep.period})"
        )


def stationary_from_matrix(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    a = m.T - np.eye(n)
    a[-1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return linalg.solve(a, b)


def stationary_distribution(kernel: StateActionKernel | np.ndarray, check: bool = True) -> np.ndarray:
    """Unique invariant law of an ergodic kernel.

    One balance equation is replaced by the normalization row. Pass
    ``check=False`` inside hot loops where ergodicity is already known.
    """
    m = kernel.matrix if isinstance(kernel, StateActionKernel) else np.asarray(kernel, dtype=float)
    if check:
        _require_ergodic(m)
    return stationary_from_matrix(m)


def visiting_measures(spec: MdpSpec, f: np.ndarray, start: np.ndarray | None = None) -> VisitingMeasures:
    """Solve ``(I - gamma P_f^T) nu = start`` (``start`` defaults to ``mu``)."""
    start = spec.mu if start is None else start
    pf = state_transition(spec, f)
    nu = linalg.solve(np.eye(spec.n_states) - spec.gamma * pf.T, start)
    sigma = f * nu[:, None]
    return VisitingMeasures(nu, sigma, (1.0 - spec.gamma) * sigma)


def value_functions(spec: MdpSpec, f: np.ndarray) -> ValuePair:
    pf = state_transition(spec, f)
    rf = np.sum(f * spec.r, axis=1)
    v = linalg.solve(np.eye(spec.n_states) - spec.gamma * pf, rf)
    q = spec.r + spec.gamma * spec.p @ v
    return ValuePair(v, q)


def objective(spec: MdpSpec, f: np.ndarray) -> float:
    return float(spec.mu @ value_functions(spec, f).v_state)


def advantage(vp: ValuePair) -> np.ndarray:
    return vp.v_state_action - vp.v_state[:, None]


def bellman_residual(spec: MdpSpec, f: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``r + gamma * sum_z p(z|x,a) sum_a'' f(z,a'') q(z,a'') - q`` for a state-action table."""
    return spec.r + spec.gamma * spec.p @ np.sum(f * q, axis=1) - q


def policy_gradient(spec: MdpSpec, theta: np.ndarray) -> np.ndarray:
    """Exact ``dJ/dtheta`` for the softmax policy, using the mass-1/(1-gamma) occupancy."""
    f = softmax_policy(theta)
    return visiting_measures(spec, f).sigma * advantage(value_functions(spec, f))


def performance_difference(spec: MdpSpec, f: np.ndarray, f2: np.ndarray, x0: int) -> tuple[float, float]:
    """Both sides of ``V^f(x0) - V^f2(x0) = sum sigma^f_{x0}(x,a) A^f2(x,a)``."""
    v1 = value_functions(spec, f)
    v2 = value_functions(spec, f2)
    start = np.zeros(spec.n_states)
    start[x0] = 1.0
    sigma = visiting_measures(spec, f, start).sigma
    lhs = v1.v_state[x0] - v2.v_state[x0]
    rhs = float(np.sum(sigma * advantage(v2)))
    return float(lhs), rhs


def greedy_mask(q: np.ndarray, tol: float = GREEDY_TOL) -> np.ndarray:
    return q >= q.max(axis=1, keepdims=True) - tol


def optimal_policy(spec: MdpSpec, max_iter: int = 10_000) -> tuple[np.ndarray, float]:
    """Deterministic optimal policy by policy iteration, ties to the lowest action index."""
    nx, na = spec.n_states, spec.n_actions
    actions = np.zeros(nx, dtype=int)
    for _ in range(max_iter):
        f = np.eye(na)[actions]
        q = value_functions(spec, f).v_state_action
        best = q.max(axis=1)
        improve = q[np.arange(nx), actions] < best - GREEDY_TOL
        if not improve.any():
            break
        actions = np.where(improve, np.argmax(greedy_mask(q), axis=1), actions)
    else:
        raise RuntimeError("policy iteration did not converge")
    actions = np.argmax(greedy_mask(q), axis=1)
    f_star = np.eye(na)[actions]
    return f_star, objective(spec, f_star)


def lojasiewicz_bounds(spec: MdpSpec, theta: np.ndarray, f_star: np.ndarray) -> LojasiewiczReport:
    """Gradient norm against the two non-uniform Lojasiewicz lower bounds.

    ``f_star`` must be a deterministic optimal policy and ``mu`` must have
    full support.
    """
    if np.any(spec.mu <= 0):
        raise ValueError("initial distribution mu must have full support")
    f = softmax_policy(theta)
    vf = value_functions(spec, f)
    nu = visiting_measures(spec, f).nu
    nu_star = visiting_measures(spec, f_star).nu
    grad = nu[:, None] * f * advantage(vf)
    gap = max(objective(spec, f_star) - float(spec.mu @ vf.v_state), 0.0)
    mismatch = float(np.max(nu_star / nu))
    a_star = np.argmax(f_star, axis=1)
    min_opt = float(np.min(f[np.arange(spec.n_states), a_star]))
    min_greedy = float(np.min(np.sum(f * greedy_mask(vf.v_state_action), axis=1)))
    nx, na = spec.n_states, spec.n_actions
    return LojasiewiczReport(
        grad_norm=float(np.linalg.norm(grad)),
        rhs_unique=min_opt * gap / (np.sqrt(nx) * mismatch),
        rhs_general=min_greedy * gap / (np.sqrt(nx * na) * mismatch),
        distribution_mismatch=mismatch,
        min_optimal_mass=min_opt,
        min_greedy_mass=min_greedy,
        gap=gap,
    )


def poisson_solution(kernel: StateActionKernel | np.ndarray, pi: np.ndarray, xi: int) -> np.ndarray:
    """Zero-mean solution of ``v - K v = 1{. = xi} - pi(xi)`` via the fundamental matrix."""
    m = kernel.matrix if isinstance(kernel, StateActionKernel) else np.asarray(kernel, dtype=float)
    _require_ergodic(m)
    n = m.shape[0]
    rhs = -np.full(n, pi[xi])
    rhs[xi] += 1.0
    return linalg.solve(np.eye(n) - m + np.outer(np.ones(n), pi), rhs)


def tv_profile(m: np.ndarray, pi: np.ndarray, n_max: int) -> np.ndarray:
    d = np.empty(n_max + 1)
    power = np.eye(m.shape[0])
    for n in range(n_max + 1):
        d[n] = 0.5 * np.abs(power - pi[None, :]).sum(axis=1).max()
        power = power @ m
    return d


def mixing_profile(kernel: StateActionKernel | np.ndarray, n_max: int = 50) -> MixingProfile:
    m = kernel.matrix if isinstance(kernel, StateActionKernel) else np.asarray(kernel, dtype=float)
    _require_ergodic(m)
    pi = stationary_from_matrix(m)
    d = tv_profile(m, pi, n_max)
    window = np.nonzero((d >= 1e-12) & (d <= 1e-2))[0]
    if window.size >= 3:
        n = window.astype(float)
        slope, icpt = np.polyfit(n, np.log(d[window]), 1)
        fit = icpt + slope * n
        resid = np.log(d[window]) - fit
        ss_tot = np.sum((np.log(d[window]) - np.log(d[window]).mean()) ** 2)
        r2 = 1.0 - resid @ resid / ss_tot if ss_tot > 0 else 1.0
        rate, pref = float(np.exp(slope)), float(np.exp(icpt))
        span = (int(window[0]), int(window[-1]))
    else:
        # mixes too fast (or too slowly) for a regression: worst single-step-equivalent rate
        n = np.arange(1, n_max + 1)
        live = d[1:] >= 1e-15
        rate = float(np.max(d[1:][live] ** (1.0 / n[live]))) if live.any() else 0.0
        pref, r2, span = 1.0, float("nan"), (1, n_max)
    return MixingProfile(d, rate, pref, r2, span, float(pi.min()))
