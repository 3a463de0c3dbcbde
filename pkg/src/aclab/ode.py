"""Deterministic limit dynamics of the actor-critic recursion, and the scalar
comparison equations used to bound their convergence."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .exact import (
    objective,
    optimal_policy,
    policy_gradient,
    value_functions,
)
from .mdp import ErgodicityError, MdpSpec, check_ergodicity, joint_kernel
from .policy import RateSchedule, exploration_policy, softmax_policy

BLOWUP_LIMIT = 1e6
GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


class OdeBlowUp(RuntimeError):
    pass


@dataclass
class OdeState:
    t: float
    theta_bar: np.ndarray
    q_bar: np.ndarray


@dataclass
class OdeTrajectory:
    """Checkpointed ODE solution with diagnostics recomputed from each state.

    ``phi`` is the critic error against the exploration-policy values,
    ``Y = phi.phi / 2``; ``critic_error_f`` is the Euclidean distance of the
    critic to the softmax-policy values; ``min_optimal_mass`` is
    ``min_x f(x, a*(x))``.
    """

    times: np.ndarray
    thetas: np.ndarray
    qs: np.ndarray
    phi: np.ndarray
    Y: np.ndarray
    J: np.ndarray
    J_gap: np.ndarray
    grad_norm: np.ndarray
    critic_error_f: np.ndarray
    min_optimal_mass: np.ndarray
    metadata: dict = field(default_factory=dict)

    def write_csv(self, path) -> Path:
        """Long-form export with table rows and scalar rows, plus a JSON sidecar."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "entry_kind", "x", "a", "value"])
            for i, t in enumerate(self.times):
                tt = repr(float(t))
                for kind, table in (("theta", self.thetas[i]), ("q", self.qs[i]), ("phi", self.phi[i])):
                    for (x, a), v in np.ndenumerate(table):
                        w.writerow([tt, kind, x, a, repr(float(v))])
                for kind, arr in (("Y", self.Y), ("J_gap", self.J_gap), ("grad_norm", self.grad_norm)):
                    w.writerow([tt, kind, "", "", repr(float(arr[i]))])
        path.with_suffix(".json").write_text(json.dumps(self.metadata, indent=1, sort_keys=True))
        return path


def ode_rhs(
    t: float,
    state: OdeState,
    spec: MdpSpec,
    alpha: float,
    schedule: RateSchedule | None = None,
    sigma_mass: str = "normalized",
    check_ergodic: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(d theta_bar / dt, d q_bar / dt)`` of the limit system.

    ``sigma_mass="unnormalized"`` drives the actor with the occupancy of mass
    ``1 / (1 - gamma)`` instead of the probability-normalized one.
    """
    schedule = schedule or RateSchedule.default()
    if check_ergodic:
        g = exploration_policy(softmax_policy(state.theta_bar), schedule.eta(t))
        for kernel in (joint_kernel(spec, g), joint_kernel(spec, softmax_policy(state.theta_bar), "restart")):
            rep = check_ergodicity(kernel)
            if not rep.ergodic:
                raise ErgodicityError(f"{kernel.tag} kernel not ergodic at t={t}")
    return _drift(t, state.theta_bar, state.q_bar, spec, alpha, schedule, sigma_mass == "normalized")


def _drift(t, theta, q, spec, alpha, schedule, normalized):
    # hot path of the integrator: plain numpy, no validation
    nx, na = theta.shape
    z = np.exp(theta - theta.max(axis=1, keepdims=True))
    f = z / z.sum(axis=1, keepdims=True)
    eta = schedule.eta(t)
    g = eta / na + (1.0 - eta) * f

    m = (spec.p[:, :, :, None] * g[None, None]).reshape(nx * na, nx * na)
    a = m.T - np.eye(nx * na)
    a[-1] = 1.0
    b = np.zeros(nx * na)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b).reshape(nx, na)

    pf = np.einsum("xa,xay->xy", f, spec.p)
    nu = np.linalg.solve(np.eye(nx) - spec.gamma * pf.T, spec.mu)
    sigma = f * nu[:, None]
    if normalized:
        sigma *= 1.0 - spec.gamma

    continuation = spec.p @ np.sum(q * g, axis=1)
    dq = alpha * pi * (spec.r + spec.gamma * continuation - q)
    dtheta = schedule.zeta(t) * sigma * (q - np.sum(q * f, axis=1, keepdims=True))
    return dtheta, dq


def critic_error(state: OdeState, spec: MdpSpec, schedule: RateSchedule | None = None) -> tuple[np.ndarray, float]:
    """``phi = q_bar - V^g`` at the current exploration policy and ``Y = |phi|^2 / 2``."""
    schedule = schedule or RateSchedule.default()
    g = exploration_policy(softmax_policy(state.theta_bar), schedule.eta(state.t))
    phi = state.q_bar - value_functions(spec, g).v_state_action
    return phi, 0.5 * float(np.sum(phi * phi))


def rk4_step(fun, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = fun(t, y)
    k2 = fun(t + h / 2, y + h / 2 * k1)
    k3 = fun(t + h / 2, y + h / 2 * k2)
    k4 = fun(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    spec: MdpSpec,
    theta0: np.ndarray,
    q0: np.ndarray,
    T: float,
    alpha: float = 1.0,
    h: float = 1e-2,
    checkpoints=None,
    schedule: RateSchedule | None = None,
    sigma_mass: str = "normalized",
    diagnostics: bool = True,
) -> OdeTrajectory:
    """Classical fixed-step RK4 from ``t = 0`` to ``T``.

    Steps of size ``h`` are taken between consecutive checkpoints, the last
    one in each interval shortened to land on the checkpoint exactly.
    Ergodicity of the kernels is checked once at the start only.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if sigma_mass not in ("normalized", "unnormalized"):
        raise ValueError(f"unknown sigma_mass {sigma_mass!r}")
    schedule = schedule or RateSchedule.default()
    checkpoints = np.array([0.0, T] if checkpoints is None else checkpoints, dtype=float)
    if np.any(np.diff(checkpoints) < 0) or checkpoints[0] < 0 or checkpoints[-1] > T + 1e-12:
        raise ValueError("checkpoints must be sorted and lie in [0, T]")
    shape = (spec.n_states, spec.n_actions)
    size = spec.n_pairs

    normalized = sigma_mass == "normalized"

    def fun(t, y):
        dth, dq = _drift(t, y[:size].reshape(shape), y[size:].reshape(shape), spec, alpha, schedule, normalized)
        return np.concatenate([dth.ravel(), dq.ravel()])

    y = np.concatenate([np.asarray(theta0, float).ravel(), np.asarray(q0, float).ravel()])
    ode_rhs(0.0, OdeState(0.0, y[:size].reshape(shape), y[size:].reshape(shape)), spec, alpha, schedule)
    t = 0.0
    states = []
    for tc in checkpoints:
        while tc - t > 1e-12 * max(1.0, tc):
            dt = min(h, tc - t)
            y = rk4_step(fun, t, y, dt)
            t = tc if tc - (t + dt) <= 1e-12 * max(1.0, tc) else t + dt
            if not np.all(np.abs(y) <= BLOWUP_LIMIT):
                raise OdeBlowUp(f"state left [-{BLOWUP_LIMIT:g}, {BLOWUP_LIMIT:g}] at t={t:.6g}: {y}")
        states.append(y.copy())

    states = np.array(states)
    thetas = states[:, :size].reshape(-1, *shape)
    qs = states[:, size:].reshape(-1, *shape)
    meta = {"T": T, "alpha": alpha, "h": h, "schedule": schedule.kind,
            "sigma_mass": sigma_mass, "mdp_hash": spec.content_hash()}
    return _with_diagnostics(spec, checkpoints, thetas, qs, schedule, meta, diagnostics)


def _with_diagnostics(spec, times, thetas, qs, schedule, meta, enabled) -> OdeTrajectory:
    n = len(times)
    phi = np.full_like(qs, np.nan)
    Y, J, gap, gn, errf, mopt = (np.full(n, np.nan) for _ in range(6))
    if enabled:
        f_star, j_star = optimal_policy(spec)
        a_star = np.argmax(f_star, axis=1)
        for i, t in enumerate(times):
            phi[i], Y[i] = critic_error(OdeState(t, thetas[i], qs[i]), spec, schedule)
            f = softmax_policy(thetas[i])
            J[i] = objective(spec, f)
            gap[i] = j_star - J[i]
            gn[i] = np.linalg.norm(policy_gradient(spec, thetas[i]))
            errf[i] = np.linalg.norm(qs[i] - value_functions(spec, f).v_state_action)
            mopt[i] = f[np.arange(spec.n_states), a_star].min()
    return OdeTrajectory(times, thetas, qs, phi, Y, J, gap, gn, errf, mopt, meta)


def comparison_ode_critic(C: float, n0: int, t0: float, y0: float, T: float, sample_times=None):
    """Solve ``dZ/dt = -C Z / log(t)**(2 n0) + 1/t`` from ``Z(t0) = y0``.

    Integrated in ``s = log t`` with an implicit method (the decay term is
    stiff for large t). Returns ``(times, Z)`` at ``sample_times``
    (default: 50 log-spaced points in ``[t0, T]``).
    """
    if t0 < 2:
        raise ValueError("t0 must be >= 2")
    if C < 0:
        raise ValueError("C must be nonnegative")
    ts = np.geomspace(t0, T, 50) if sample_times is None else np.asarray(sample_times, float)
    s_eval = np.log(ts)

    def rhs(s, z):
        return -C * np.exp(s) * z / s ** (2 * n0) + 1.0

    def jac(s, z):
        return [[-C * np.exp(s) / s ** (2 * n0)]]

    sol = solve_ivp(rhs, (np.log(t0), np.log(T)), [y0], method="Radau", jac=jac,
                    t_eval=s_eval, rtol=1e-10, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    z = sol.y[0]
    if np.any(z < -1e-12):
        raise AssertionError("comparison solution went negative")
    return ts, z


def actor_fixed_point(C: float = 1.0) -> float:
    """Positive stationary value of ``X = Z log t`` for the actor comparison equation."""
    return (1.0 + np.sqrt(1.0 + 4.0 * C * C)) / (2.0 * C)


def comparison_ode_actor(C: float, t0: float, z0: float, T: float, sample_times=None):
    """Solve ``dZ/dt = -(C/t) Z**2 + C / (t log(t)**2)`` from ``Z(t0) = z0``.

    Returns ``(times, Z, X)`` with ``X = Z log t``; asserts
    ``0 <= X <= max(X(t0), X*) + 1e-9``, ``X*`` the positive fixed point
    (the golden ratio when ``C = 1``).
    """
    if t0 < 2:
        raise ValueError("t0 must be >= 2")
    ts = np.geomspace(t0, T, 200) if sample_times is None else np.asarray(sample_times, float)

    def rhs(s, z):
        return -C * z * z + C / (s * s)

    sol = solve_ivp(rhs, (np.log(t0), np.log(T)), [z0], method="DOP853",
                    t_eval=np.log(ts), rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    z = sol.y[0]
    x = z * np.log(ts)
    bound = max(z0 * np.log(t0), actor_fixed_point(C)) + 1e-9
    if np.any(x < -1e-9) or np.any(x > bound):
        raise AssertionError(f"X left [0, {bound}]")
    return ts, z, x


@dataclass
class ComparisonCheck:
    inequality_holds: bool
    ordering_holds: bool
    max_inequality_violation: float
    max_ordering_violation: float
    Z: np.ndarray


def check_critic_comparison(ts, ys, C: float, n0: int, slack: float = 1e-9) -> ComparisonCheck:
    """Test ``dY/dt <= -C Y / log(t)**(2 n0) + 1/t`` on samples, then ``Y <= Z``.

    ``dY/dt`` is estimated by second-order finite differences on the samples,
    which should therefore be dense. ``Z`` starts from ``Y(ts[0])``.
    """
    ts = np.asarray(ts, float)
    ys = np.asarray(ys, float)
    dy = np.gradient(ys, ts)
    bound = -C * ys / np.log(ts) ** (2 * n0) + 1.0 / ts
    ineq = float(np.max(dy - bound))
    _, z = comparison_ode_critic(C, n0, ts[0], ys[0], ts[-1], ts)
    order = float(np.max(ys - z))
    return ComparisonCheck(ineq <= slack, order <= slack * max(1.0, float(np.max(z))), ineq, order, z)


def rk4_error_ratio(spec: MdpSpec, T: float = 2.0, h: float = 0.1, alpha: float = 1.0,
                    theta0=None, q0=None, schedule: RateSchedule | None = None) -> float:
    """Observed ``err(h) / err(h/2)`` of the final state against an ``h/8`` reference.

    About 16 for a fourth-order method in its asymptotic regime.
    """
    shape = (spec.n_states, spec.n_actions)
    theta0 = np.zeros(shape) if theta0 is None else theta0
    q0 = np.zeros(shape) if q0 is None else q0

    def final(step):
        tr = integrate(spec, theta0, q0, T, alpha, step, [T], schedule, diagnostics=False)
        return np.concatenate([tr.thetas[-1].ravel(), tr.qs[-1].ravel()])

    ref = final(h / 8)
    return float(np.linalg.norm(final(h) - ref) / np.linalg.norm(final(h / 2) - ref))
