"""The online actor-critic recursion with its two sample chains.

The critic chain runs on the original MDP under the exploration policy
``g_k``; the actor chain runs on the restart MDP under the softmax policy
``f_k``. One step draws four uniforms, always in the order
(critic next state, actor next state, critic next action, actor next action),
so a run is a deterministic function of ``(spec, config)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import floor
from pathlib import Path
from typing import Callable

import numpy as np

from .exact import stationary_from_matrix, visiting_measures
from .mdp import MdpSpec, ensure_valid, joint_kernel, restart_kernel
from .policy import RateSchedule, exploration_policy, softmax_policy

FLUCTUATION_MAX_PAIRS = 64


def step_index(N: int, t: float) -> int:
    """``floor(N t)``, robust to the representation error of ``t``."""
    return int(floor(N * t + 1e-9))


@dataclass
class AcConfig:
    N: int
    T: float
    alpha: float = 1.0
    theta0: np.ndarray | None = None
    q0: np.ndarray | None = None
    seed: int = 0
    checkpoint_times: list[float] = field(default_factory=list)
    run_id: int = 0
    schedule: RateSchedule = field(default_factory=RateSchedule.default)
    frozen: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        ts = list(self.checkpoint_times)
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("checkpoint_times must be sorted")
        if ts and (ts[0] < 0 or ts[-1] > self.T + 1e-12):
            raise ValueError("checkpoint_times must lie in [0, T]")

    @property
    def n_steps(self) -> int:
        return step_index(self.N, self.T)

    def tables(self, spec: MdpSpec) -> tuple[np.ndarray, np.ndarray]:
        shape = (spec.n_states, spec.n_actions)
        theta = np.zeros(shape) if self.theta0 is None else np.array(self.theta0, dtype=float)
        q = np.zeros(shape) if self.q0 is None else np.array(self.q0, dtype=float)
        if theta.shape != shape or q.shape != shape:
            raise ValueError(f"initial tables must have shape {shape}")
        return theta, q

    def echo(self) -> dict:
        return {
            "N": self.N,
            "T": self.T,
            "alpha": self.alpha,
            "theta0": None if self.theta0 is None else np.asarray(self.theta0).tolist(),
            "q0": None if self.q0 is None else np.asarray(self.q0).tolist(),
            "seed": self.seed,
            "run_id": self.run_id,
            "checkpoint_times": list(self.checkpoint_times),
            "schedule": self.schedule.kind,
            "frozen": self.frozen,
        }


@dataclass
class AcRunState:
    k: int
    theta: np.ndarray
    q: np.ndarray
    x: int
    a: int
    xt: int
    at: int
    rng: np.random.Generator

    def same_as(self, other: AcRunState) -> bool:
        return (
            (self.k, self.x, self.a, self.xt, self.at) == (other.k, other.x, other.a, other.xt, other.at)
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.q, other.q)
            and _state_equal(self.rng.bit_generator.state, other.rng.bit_generator.state)
        )


def _state_equal(a, b) -> bool:
    # generator states are nested dicts holding counter and key arrays
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_state_equal(a[k], b[k]) for k in a)
    return bool(np.array_equal(a, b))


@dataclass
class RunTrajectory:
    times: np.ndarray
    steps: np.ndarray
    thetas: np.ndarray
    qs: np.ndarray
    metadata: dict

    def write_csv(self, path) -> Path:
        """Long-form export: one row per (checkpoint, state, action)."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "a", "theta", "q"])
            for t, th, q in zip(self.times, self.thetas, self.qs):
                for x in range(th.shape[0]):
                    for a in range(th.shape[1]):
                        w.writerow([repr(float(t)), x, a, repr(float(th[x, a])), repr(float(q[x, a]))])
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.metadata, indent=1, sort_keys=True))
        return path


def make_rng(seed: int, run_id: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, run_id)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run_id])))


def _draw(cdf: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(cdf, u, side="right"))
    return min(i, cdf.shape[0] - 1)


def _softmax_row(row: np.ndarray) -> np.ndarray:
    z = np.exp(row - row.max())
    return z / z.sum()


class _Chains:
    """Cumulative transition tables shared by every step of a run."""

    def __init__(self, spec: MdpSpec):
        self.spec = spec
        self.cdf = np.cumsum(spec.p, axis=2)
        self.cdf_restart = np.cumsum(restart_kernel(spec), axis=2)
        self.na = spec.n_actions


def init_run(spec: MdpSpec, config: AcConfig) -> AcRunState:
    ensure_valid(spec)
    theta, q = config.tables(spec)
    rng = make_rng(config.seed, config.run_id)
    u = rng.random(4)
    mu_cdf = np.cumsum(spec.mu)
    x = _draw(mu_cdf, u[0])
    xt = _draw(mu_cdf, u[1])
    eta0 = config.schedule.eta_discrete(0, config.N)
    a = _draw(np.cumsum(exploration_policy(_softmax_row(theta[x]), eta0)), u[2])
    at = _draw(np.cumsum(_softmax_row(theta[xt])), u[3])
    return AcRunState(0, theta, q, x, a, xt, at, rng)


def _step(s: AcRunState, spec: MdpSpec, config: AcConfig, chains: _Chains) -> AcRunState:
    N, k = config.N, s.k
    sched = config.schedule
    zeta = sched.zeta_discrete(k, N)
    eta = sched.eta_discrete(k, N)
    u = s.rng.random(4)
    theta, q = s.theta, s.q

    x1 = _draw(chains.cdf[s.x, s.a], u[0])
    xt1 = _draw(chains.cdf_restart[s.xt, s.at], u[1])
    if config.frozen:
        theta1, q1 = theta, q
    else:
        g_next = exploration_policy(_softmax_row(theta[x1]), eta)
        td = spec.r[s.x, s.a] + spec.gamma * (q[x1] @ g_next) - q[s.x, s.a]
        q1 = q.copy()
        q1[s.x, s.a] += config.alpha / N * td
        score = -_softmax_row(theta[s.xt])
        score[s.at] += 1.0
        theta1 = theta.copy()
        theta1[s.xt] += zeta / N * q[s.xt, s.at] * score

    eta1 = sched.eta_discrete(k + 1, N)
    a1 = _draw(np.cumsum(exploration_policy(_softmax_row(theta1[x1]), eta1)), u[2])
    at1 = _draw(np.cumsum(_softmax_row(theta1[xt1])), u[3])
    return AcRunState(k + 1, theta1, q1, x1, a1, xt1, at1, s.rng)


def step(state: AcRunState, spec: MdpSpec, config: AcConfig) -> AcRunState:
    """One actor-critic update; returns a new state (the generator is advanced in place)."""
    if state.k >= config.n_steps:
        raise RuntimeError(f"horizon exhausted at k={state.k}")
    return _step(state, spec, config, _Chains(spec))


def iterate(spec: MdpSpec, config: AcConfig):
    """Yield the initial state and then the state after each of the ``floor(N T)`` steps."""
    chains = _Chains(spec)
    s = init_run(spec, config)
    yield s
    for _ in range(config.n_steps):
        s = _step(s, spec, config, chains)
        yield s


def run(
    spec: MdpSpec,
    config: AcConfig,
    monitor: Callable[[AcRunState, AcRunState], None] | None = None,
) -> RunTrajectory:
    """Run ``floor(N T)`` steps, snapshotting after step ``floor(N t_c)`` for each checkpoint.

    ``monitor(prev, new)`` is called after every step.
    """
    wanted = [step_index(config.N, t) for t in config.checkpoint_times]
    thetas, qs = [], []
    j = 0
    prev = None
    for s in iterate(spec, config):
        if monitor is not None and prev is not None:
            monitor(prev, s)
        while j < len(wanted) and wanted[j] == s.k:
            thetas.append(s.theta.copy())
            qs.append(s.q.copy())
            j += 1
        prev = s
    shape = (0, spec.n_states, spec.n_actions)
    meta = {"config": config.echo(), "mdp_hash": spec.content_hash(), "steps": config.n_steps}
    return RunTrajectory(
        np.array(config.checkpoint_times, dtype=float),
        np.array(wanted, dtype=int),
        np.array(thetas) if thetas else np.empty(shape),
        np.array(qs) if qs else np.empty(shape),
        meta,
    )


@dataclass
class Fluctuation:
    """Stochastic error terms at the horizon: the actor term and the three critic terms."""

    actor: np.ndarray
    critic_parts: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def actor_l1(self) -> float:
        return float(np.abs(self.actor).sum())

    @property
    def critic_l1(self) -> float:
        return float(sum(np.abs(m).sum() for m in self.critic_parts))


def empirical_fluctuation(spec: MdpSpec, config: AcConfig) -> Fluctuation:
    """Accumulate sample-minus-stationary-expectation sums alongside a run.

    Expectations at step ``k`` use the normalized occupancy of ``f_k`` (actor)
    and the stationary law of the ``g_k`` state-action chain (critic).
    """
    if spec.n_pairs > FLUCTUATION_MAX_PAIRS:
        raise ValueError(f"fluctuation diagnostics limited to {FLUCTUATION_MAX_PAIRS} state-action pairs")
    nx, na = spec.n_states, spec.n_actions
    N, sched = config.N, config.schedule
    m_actor = np.zeros((nx, na))
    m1, m2, m3 = np.zeros((nx, na)), np.zeros((nx, na)), np.zeros((nx, na))
    prev = None
    for s in iterate(spec, config):
        if prev is not None:
            k = prev.k
            zeta = sched.zeta_discrete(k, N)
            eta = sched.eta_discrete(k, N)
            theta, q = prev.theta, prev.q
            f = softmax_policy(theta)
            g = exploration_policy(f, eta)
            sigma = visiting_measures(spec, f).sigma_normalized
            pi = stationary_from_matrix(joint_kernel(spec, g).matrix).reshape(nx, na)

            score = -f[prev.xt].copy()
            score[prev.at] += 1.0
            m_actor[prev.xt] += zeta * q[prev.xt, prev.at] * score
            m_actor -= zeta * sigma * (q - np.sum(q * f, axis=1, keepdims=True))

            xi = (prev.x, prev.a)
            continuation = spec.gamma * (q[s.x] @ g[s.x])
            m1[xi] -= q[xi]
            m1 += q * pi
            m2[xi] += spec.r[xi]
            m2 -= spec.r * pi
            m3[xi] += continuation
            m3 -= pi * spec.gamma * (spec.p @ np.sum(q * g, axis=1))
        prev = s
    return Fluctuation(m_actor / N, (m1 / N, m2 / N, m3 / N))


class IncrementMonitor:
    """Per-step a priori checks for use as the ``monitor`` of :func:`run`.

    Asserts the critic and actor increment bounds and that only the visited
    critic entry and the visited actor row change. Violations are collected
    rather than raised.
    """

    def __init__(self, spec: MdpSpec, config: AcConfig, slack: float = 1e-12):
        self.spec, self.config, self.slack = spec, config, slack
        self.steps = 0
        self.violations: list[str] = []
        self.max_q = 0.0

    def __call__(self, prev: AcRunState, new: AcRunState) -> None:
        cfg, gamma = self.config, self.spec.gamma
        k, N = prev.k, cfg.N
        qmax = float(np.abs(prev.q).max())
        self.max_q = max(self.max_q, qmax, float(np.abs(new.q).max()))
        dq = new.q - prev.q
        dth = new.theta - prev.theta
        bound_q = cfg.alpha / N * (1.0 + (1.0 + gamma) * qmax)
        if np.abs(dq).max() > bound_q * (1 + self.slack) + self.slack:
            self.violations.append(f"k={k}: critic increment {np.abs(dq).max():.3g} > {bound_q:.3g}")
        bound_th = 2.0 * cfg.schedule.zeta_discrete(k, N) / N * qmax
        if np.abs(dth).sum() > bound_th * (1 + self.slack) + self.slack:
            self.violations.append(f"k={k}: actor increment {np.abs(dth).sum():.3g} > {bound_th:.3g}")
        dq[prev.x, prev.a] = 0.0
        dth[prev.xt] = 0.0
        if np.any(dq) or np.any(dth):
            self.violations.append(f"k={k}: entries outside the visited pair/row changed")
        self.steps += 1

    @property
    def ok(self) -> bool:
        return not self.violations
