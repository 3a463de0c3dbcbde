"""Registry of exact-solver and a priori property checks run by ``aclab verify``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import exact
from .mdp import MdpSpec, chain_mdp, check_ergodicity, joint_kernel, random_mdp, restart_kernel
from .ode import integrate
from .online import AcConfig, IncrementMonitor, run
from .policy import RateSchedule, check_rate_properties, exploration_policy, softmax_policy

FD_STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_instances(n: int, seed: int = 0, extra: list[MdpSpec] | None = None):
    """Seeded ``(spec, theta)`` pairs on small random ergodic MDPs."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        nx = int(rng.integers(2, 6))
        na = int(rng.integers(2, 4))
        gamma = float(rng.choice([0.5, 0.8, 0.9, 0.95]))
        spec = random_mdp(nx, na, gamma, seed=int(rng.integers(2**31)), min_prob=0.01)
        out.append((spec, rng.normal(scale=2.0, size=(nx, na))))
    for spec in extra or []:
        out.append((spec, rng.normal(scale=2.0, size=(spec.n_states, spec.n_actions))))
    return out


def finite_difference_gradient(spec: MdpSpec, theta: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences of ``J(softmax(theta))``; an oracle for :func:`exact.policy_gradient`."""
    grad = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        e = np.zeros_like(theta)
        e[idx] = step
        hi = exact.objective(spec, softmax_policy(theta + e))
        lo = exact.objective(spec, softmax_policy(theta - e))
        grad[idx] = (hi - lo) / (2 * step)
    return grad


def check_policy_gradient(instances, rel: float = 1e-6, abs_tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for spec, theta in instances:
        g = exact.policy_gradient(spec, theta)
        fd = finite_difference_gradient(spec, theta)
        worst = max(worst, float(np.max(np.abs(g - fd) / (rel * np.abs(g) + abs_tol))))
    return CheckResult("policy-gradient-fd", worst <= 1.0, f"worst error / tolerance = {worst:.3g}")


def check_bellman(instances, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for spec, theta in instances:
        f = softmax_policy(theta)
        q = exact.value_functions(spec, f).v_state_action
        worst = max(worst, float(np.abs(exact.bellman_residual(spec, f, q)).max()))
    return CheckResult("bellman-residual", worst <= tol, f"max residual {worst:.3g}")


def check_poisson(instances, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for spec, theta in instances:
        f = softmax_policy(theta)
        for kernel in (joint_kernel(spec, f, "restart"), joint_kernel(spec, exploration_policy(f, 0.1))):
            pi = exact.stationary_distribution(kernel)
            m = kernel.matrix
            for xi in range(kernel.size):
                v = exact.poisson_solution(kernel, pi, xi)
                rhs = -np.full(kernel.size, pi[xi])
                rhs[xi] += 1.0
                worst = max(worst, float(np.abs(v - m @ v - rhs).max()))
    return CheckResult("poisson-residual", worst <= tol, f"max residual {worst:.3g}")


def check_performance_difference(instances, tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    rng = np.random.default_rng(1)
    for spec, theta in instances:
        f = softmax_policy(theta)
        f2 = softmax_policy(rng.normal(scale=2.0, size=theta.shape))
        for x0 in range(spec.n_states):
            lhs, rhs = exact.performance_difference(spec, f, f2, x0)
            worst = max(worst, abs(lhs - rhs))
    return CheckResult("performance-difference", worst <= tol, f"max |lhs - rhs| {worst:.3g}")


def check_konda_stationarity(instances, tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for spec, theta in instances:
        f = softmax_policy(theta)
        pi = exact.stationary_distribution(joint_kernel(spec, f, "restart"))
        sig = exact.visiting_measures(spec, f).sigma_normalized.ravel()
        worst = max(worst, float(np.abs(pi - sig).max()))
    return CheckResult("konda-stationarity", worst <= tol, f"max |pi - (1-gamma) sigma| {worst:.3g}")


def check_lojasiewicz(specs, draws: int = 100, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    held = total = 0
    for spec in specs:
        f_star, _ = exact.optimal_policy(spec)
        for _ in range(draws):
            theta = rng.normal(scale=3.0, size=(spec.n_states, spec.n_actions))
            rep = exact.lojasiewicz_bounds(spec, theta, f_star)
            held += bool(rep.holds)
            total += 1
    return CheckResult("lojasiewicz", held == total, f"{held}/{total} inequality checks hold")


def check_rates() -> CheckResult:
    rep = check_rate_properties(RateSchedule.default(), 1e6, [1, 2, 4])
    detail = ", ".join(f"{c.name}={c.value:.3g}" for c in rep.checks)
    return CheckResult("rate-properties", rep.passed, detail)


def check_kernels(instances) -> CheckResult:
    bad = []
    for i, (spec, theta) in enumerate(instances):
        f = softmax_policy(theta)
        if np.abs(restart_kernel(spec).sum(axis=2) - 1).max() > 1e-12:
            bad.append(f"{i}: restart rows")
        k = joint_kernel(spec, f, "restart")
        if np.abs(k.matrix.sum(axis=1) - 1).max() > 1e-9 or not check_ergodicity(k).ergodic:
            bad.append(f"{i}: restart joint kernel")
    return CheckResult("kernel-ergodicity", not bad, "; ".join(bad) or f"{len(instances)} instances ok")


def check_critic_a_priori(n_steps: int = 100_000, N: int = 10_000) -> CheckResult:
    spec = chain_mdp()
    cfg = AcConfig(N=N, T=n_steps / N, seed=11)
    mon = IncrementMonitor(spec, cfg)
    run(spec, cfg, monitor=mon)
    detail = f"{mon.steps} steps, {len(mon.violations)} violations"
    return CheckResult("critic-increment-bound", mon.ok and mon.steps == n_steps, detail)


def check_ode_critic_bound(specs, T: float = 20.0) -> CheckResult:
    worst = 0.0
    for spec in specs:
        shape = (spec.n_states, spec.n_actions)
        tr = integrate(spec, np.zeros(shape), np.zeros(shape), T, 1.0, 0.05,
                       np.linspace(0, T, 201), diagnostics=False)
        worst = max(worst, float(np.abs(tr.qs).max() * (1 - spec.gamma) / 2))
    return CheckResult("ode-critic-bound", worst <= 1.0, f"max |Q| (1-gamma)/2 = {worst:.3g}")


def registry(extra_specs: list[MdpSpec] | None = None) -> dict[str, Callable[[], CheckResult]]:
    inst = random_instances(20, extra=extra_specs)
    specs = [chain_mdp()] + [s for s, _ in inst[:4]] + list(extra_specs or [])
    return {
        "policy-gradient-fd": lambda: check_policy_gradient(inst),
        "bellman-residual": lambda: check_bellman(inst),
        "poisson-residual": lambda: check_poisson(inst),
        "performance-difference": lambda: check_performance_difference(inst),
        "konda-stationarity": lambda: check_konda_stationarity(inst),
        "lojasiewicz": lambda: check_lojasiewicz(specs),
        "rate-properties": check_rates,
        "kernel-ergodicity": lambda: check_kernels(inst),
        "critic-increment-bound": check_critic_a_priori,
        "ode-critic-bound": lambda: check_ode_critic_bound(specs),
    }


def verify(filter: str | None = None, extra_specs: list[MdpSpec] | None = None) -> list[CheckResult]:
    """Run every registered check whose name contains ``filter``."""
    checks = registry(extra_specs)
    return [fn() for name, fn in checks.items() if filter is None or filter in name]
