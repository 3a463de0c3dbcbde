"""Finite MDPs, their restart variant, and state-action Markov kernels.

State-action pairs are flattened row-major, ``xi = x * n_actions + a``,
everywhere in the package.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

SIMPLEX_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when an MDP (or a value derived from it) violates its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid MDP")


class ErgodicityError(ValueError):
    """Raised when a kernel is reducible or periodic but ergodicity is required."""


@dataclass(frozen=True, eq=False)
class MdpSpec:
    """A finite MDP ``(X, A, p, mu, r, gamma)``.

    ``p`` has shape ``(n_states, n_actions, n_states)`` and is indexed
    ``p[x, a, x_next]``. Arrays are copied and made read-only on construction.
    """

    p: np.ndarray
    mu: np.ndarray
    r: np.ndarray
    gamma: float

    def __post_init__(self):
        for name in ("p", "mu", "r"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def n_actions(self) -> int:
        return self.p.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    def __eq__(self, other):
        if not isinstance(other, MdpSpec):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.r, other.r)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "mu": self.mu.tolist(),
            "r": self.r.tolist(),
            "p": self.p.tolist(),
        }

    def content_hash(self) -> str:
        """SHA-1 of the canonical JSON encoding, in the style of a git blob id."""
        body = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass(frozen=True, eq=False)
class StateActionKernel:
    """Transition matrix over flattened state-action pairs."""

    matrix: np.ndarray
    tag: str
    n_states: int = field(default=0)
    n_actions: int = field(default=0)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ErgodicityReport:
    irreducible: bool
    aperiodic: bool
    period: int
    n_communicating_classes: int

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


def validate_mdp(spec: MdpSpec, tol: float = SIMPLEX_TOL) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    out = []
    p, mu, r = spec.p, spec.mu, spec.r
    if p.ndim != 3 or p.shape[0] != p.shape[2] or 0 in p.shape:
        return [f"p has shape {p.shape}, expected (n_states, n_actions, n_states)"]
    nx, na = p.shape[:2]
    if mu.shape != (nx,):
        out.append(f"mu has shape {mu.shape}, expected ({nx},)")
    if r.shape != (nx, na):
        out.append(f"r has shape {r.shape}, expected ({nx}, {na})")
    if out:
        return out

    for x, a in zip(*np.nonzero(~np.isfinite(p).all(axis=2))):
        out.append(f"row ({x},{a}) has non-finite entries")
    for x, a, y in zip(*np.nonzero(p < 0)):
        out.append(f"negative probability {p[x, a, y]:.3g} at p[{x}][{a}][{y}]")
    sums = p.sum(axis=2)
    for x, a in zip(*np.nonzero(np.abs(sums - 1.0) > tol)):
        out.append(f"row ({x},{a}) sums to {sums[x, a]:.12g}")

    for x in np.nonzero(mu < 0)[0]:
        out.append(f"negative initial probability {mu[x]:.3g} at mu[{x}]")
    if not abs(mu.sum() - 1.0) <= tol:
        out.append(f"mu sums to {mu.sum():.12g}")

    for x, a in zip(*np.nonzero(~((r >= 0) & (r <= 1)))):
        out.append(f"reward out of [0,1] at ({x},{a}): {r[x, a]:.6g}")

    if not 0.0 < spec.gamma < 1.0:
        out.append(f"gamma={spec.gamma} outside (0,1)")
    return out


def ensure_valid(spec: MdpSpec) -> MdpSpec:
    violations = validate_mdp(spec)
    if violations:
        raise ValidationError(violations)
    return spec


def restart_kernel(spec: MdpSpec) -> np.ndarray:
    """Transition tensor of the chain that follows ``p`` w.p. gamma, else restarts from mu."""
    ensure_valid(spec)
    return spec.gamma * spec.p + (1.0 - spec.gamma) * spec.mu[None, None, :]


def joint_kernel(spec: MdpSpec, policy: np.ndarray, construction: str = "original") -> StateActionKernel:
    """State-action kernel ``K[(x,a),(x',a')] = kernel(x'|x,a) * policy(x',a')``.

    ``construction`` is ``"original"`` (use ``p``; pass the exploration policy)
    or ``"restart"`` (use the restart kernel; pass the softmax policy).
    """
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (spec.n_states, spec.n_actions):
        raise ValueError(
            f"policy shape {policy.shape} does not match MDP ({spec.n_states}, {spec.n_actions})"
        )
    if construction == "original":
        trans = spec.p
    elif construction == "restart":
        trans = restart_kernel(spec)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    nx, na = spec.n_states, spec.n_actions
    k = trans[:, :, :, None] * policy[None, None, :, :]
    return StateActionKernel(k.reshape(nx * na, nx * na), construction, nx, na)


def _period(adj: np.ndarray) -> int:
    # BFS levels from node 0; period = gcd of level[u] + 1 - level[v] over edges u->v
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(adj[u])[0]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        g = gcd(g, int(level[u] + 1 - level[v]))
    return max(g, 1)


def check_ergodicity(kernel: StateActionKernel | np.ndarray) -> ErgodicityReport:
    m = kernel.matrix if isinstance(kernel, StateActionKernel) else np.asarray(kernel)
    adj = m > 0
    n_classes, _ = connected_components(adj, directed=True, connection="strong")
    irreducible = n_classes == 1
    period = _period(adj) if irreducible else 0
    return ErgodicityReport(irreducible, irreducible and period == 1, period, int(n_classes))


def random_mdp(n_states: int, n_actions: int, gamma: float, seed: int, min_prob: float = 0.0) -> MdpSpec:
    """Draw a random MDP: flat-Dirichlet transition rows floored at ``min_prob``."""
    if n_states < 1 or n_actions < 1:
        raise ValueError("n_states and n_actions must be >= 1")
    if not 0.0 <= min_prob <= 1.0 / n_states:
        raise ValueError(f"min_prob={min_prob} infeasible for {n_states} states")
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    p = np.maximum(p, min_prob)
    p /= p.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    mu = np.full(n_states, 1.0 / n_states)
    return MdpSpec(p, mu, r, gamma)


def chain_mdp(gamma: float = 0.9) -> MdpSpec:
    """Two states, two actions: action 0 stays and action 1 switches, each w.p. 0.9.

    Reward is 1 in state 1 and 0 in state 0.
    """
    p = np.array([
        [[0.9, 0.1], [0.1, 0.9]],
        [[0.1, 0.9], [0.9, 0.1]],
    ])
    r = np.array([[0.0, 0.0], [1.0, 1.0]])
    return MdpSpec(p, np.array([0.5, 0.5]), r, gamma)


def single_state_mdp(reward: float = 0.5, gamma: float = 0.5, n_actions: int = 1) -> MdpSpec:
    return MdpSpec(np.ones((1, n_actions, 1)), np.ones(1), np.full((1, n_actions), reward), gamma)


def constant_reward_mdp(c: float = 0.5, gamma: float = 0.9, seed: int = 0) -> MdpSpec:
    base = random_mdp(3, 2, gamma, seed, min_prob=0.05)
    return MdpSpec(base.p, base.mu, np.full_like(base.r, c), gamma)


FIXTURES = {
    "chainmdp": chain_mdp,
    "chainmdp-gamma0.5": lambda: chain_mdp(0.5),
    "single": lambda: single_state_mdp(0.5, 0.5),
    "constant": constant_reward_mdp,
}


def fixture(name: str) -> MdpSpec:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def _renormalize(arr: np.ndarray, axis: int) -> np.ndarray:
    s = arr.sum(axis=axis, keepdims=True)
    ok = np.abs(s - 1.0) <= SIMPLEX_TOL
    return np.where(ok, arr / np.where(s == 0, 1.0, s), arr)


def mdp_from_dict(doc: dict) -> MdpSpec:
    """Build and validate an MDP from its JSON document.

    Distributions within tolerance of the simplex are renormalized exactly.
    """
    try:
        p = np.asarray(doc["p"], dtype=float)
        mu = np.asarray(doc["mu"], dtype=float)
        r = np.asarray(doc["r"], dtype=float)
        gamma = float(doc["gamma"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError([f"malformed MDP document: {exc}"]) from exc
    declared = (doc.get("n_states"), doc.get("n_actions"))
    if p.ndim == 3 and declared != (None, None) and declared != p.shape[:2]:
        raise ValidationError([f"declared shape {declared} does not match p {p.shape[:2]}"])
    spec = MdpSpec(p, mu, r, gamma)
    ensure_valid(spec)
    return MdpSpec(_renormalize(spec.p, 2), _renormalize(spec.mu, 0), spec.r, gamma)


def load_mdp(path) -> MdpSpec:
    with open(path) as fh:
        return mdp_from_dict(json.load(fh))


def save_mdp(spec: MdpSpec, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(spec.to_dict(), indent=1))
    return path
