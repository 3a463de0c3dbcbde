import numpy as np
import pytest

from aclab.mdp import MdpSpec, chain_mdp, constant_reward_mdp, random_mdp, single_state_mdp


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture
def single():
    return single_state_mdp(0.5, 0.5)


@pytest.fixture
def constant():
    return constant_reward_mdp(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pairs(n, seed=0):
    """Small random ergodic MDPs with a random softmax parameter each."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        nx, na = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        spec = random_mdp(nx, na, float(rng.choice([0.5, 0.9])), int(rng.integers(2**31)), min_prob=0.02)
        out.append((spec, rng.normal(scale=2.0, size=(nx, na))))
    return out


def identity_chain(gamma=0.9):
    p = np.zeros((2, 2, 2))
    for x in range(2):
        p[x, :, x] = 1.0
    return MdpSpec(p, np.array([0.5, 0.5]), np.zeros((2, 2)), gamma)
