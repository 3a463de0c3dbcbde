import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aclab.exact import stationary_distribution, visiting_measures
from aclab.mdp import (
    MdpSpec,
    ValidationError,
    check_ergodicity,
    fixture,
    joint_kernel,
    load_mdp,
    mdp_from_dict,
    random_mdp,
    restart_kernel,
    save_mdp,
    validate_mdp,
)
from aclab.policy import softmax_policy

from conftest import identity_chain


def one_state(p=1.0, r=0.5, gamma=0.5):
    return MdpSpec([[[p]]], [1.0], [[r]], gamma)


class TestValidate:
    def test_single_state_valid(self):
        assert validate_mdp(one_state()) == []

    def test_reward_out_of_range(self):
        v = validate_mdp(one_state(r=1.5))
        assert len(v) == 1
        assert v[0].startswith("reward out of [0,1] at (0,0)")

    def test_row_sum(self):
        assert validate_mdp(one_state(p=0.9)) == ["row (0,0) sums to 0.9"]

    def test_gamma_bounds(self):
        assert validate_mdp(one_state(gamma=1.0))
        assert validate_mdp(one_state(gamma=0.0))

    def test_negative_entries_and_mu(self):
        spec = MdpSpec([[[1.2, -0.2], [0.5, 0.5]]] * 2, [1.1, -0.1], np.zeros((2, 2)), 0.9)
        msgs = " | ".join(validate_mdp(spec))
        assert "negative probability" in msgs
        assert "negative initial probability" in msgs

    def test_shape_mismatch(self):
        spec = MdpSpec(np.ones((2, 1, 2)) / 2, [1.0], np.zeros((2, 1)), 0.9)
        assert "mu has shape" in validate_mdp(spec)[0]

    def test_fixtures_valid(self):
        for name in ("chainmdp", "chainmdp-gamma0.5", "single", "constant"):
            assert validate_mdp(fixture(name)) == []
        with pytest.raises(ValueError):
            fixture("nope")


class TestRestartKernel:
    def test_single_state(self):
        for gamma in (0.1, 0.5, 0.99):
            np.testing.assert_array_equal(restart_kernel(one_state(gamma=gamma)), [[[1.0]]])

    def test_identity_chain(self):
        pt = restart_kernel(identity_chain(0.9))
        for x in range(2):
            np.testing.assert_allclose(pt[x, :, x], 0.95)
            np.testing.assert_allclose(pt[x, :, 1 - x], 0.05)

    def test_chain_rows(self, chain):
        assert np.abs(restart_kernel(chain).sum(axis=2) - 1).max() <= 1e-12

    def test_invalid_spec_raises(self):
        with pytest.raises(ValidationError):
            restart_kernel(one_state(p=0.9))


class TestJointKernel:
    def test_symmetric_uniform_doubly_stochastic(self, chain):
        m = joint_kernel(chain, np.full((2, 2), 0.5)).matrix
        assert m.shape == (4, 4)
        np.testing.assert_allclose(m.sum(axis=0), 1.0)
        np.testing.assert_allclose(m.sum(axis=1), 1.0)

    def test_deterministic_policy_support(self):
        spec = random_mdp(3, 2, 0.9, seed=3, min_prob=0.01)
        f = np.eye(2)[[0, 1, 1]]
        m = joint_kernel(spec, f).matrix
        assert np.all((m > 0).sum(axis=1) == spec.n_states)

    def test_row_major_flattening(self, chain):
        f = softmax_policy(np.array([[0.3, -1.0], [2.0, 0.1]]))
        k = joint_kernel(chain, f)
        for x in range(2):
            for a in range(2):
                for y in range(2):
                    for b in range(2):
                        assert k.matrix[x * 2 + a, y * 2 + b] == pytest.approx(chain.p[x, a, y] * f[y, b])
        assert k.tag == "original"

    def test_restart_stationary_is_neumann_series(self, chain):
        f = np.full((2, 2), 0.5)
        pi = stationary_distribution(joint_kernel(chain, f, "restart"))
        pf = np.einsum("xa,xay->xy", f, chain.p)
        nu, term = np.zeros(2), chain.mu.copy()
        for k in range(400):
            nu += term
            term = chain.gamma * term @ pf
        assert chain.gamma**400 / (1 - chain.gamma) < 1e-12
        np.testing.assert_allclose(pi, ((1 - chain.gamma) * f * nu[:, None]).ravel(), atol=1e-12)
        np.testing.assert_allclose(pi, visiting_measures(chain, f).sigma_normalized.ravel(), atol=1e-12)

    def test_bad_inputs(self, chain):
        with pytest.raises(ValueError):
            joint_kernel(chain, np.ones((3, 2)) / 2)
        with pytest.raises(ValueError):
            joint_kernel(chain, np.ones((2, 2)) / 2, "other")


class TestErgodicity:
    def test_identity(self):
        rep = check_ergodicity(np.eye(3))
        assert not rep.irreducible and not rep.ergodic
        assert rep.n_communicating_classes == 3

    def test_positive(self):
        rep = check_ergodicity(np.full((4, 4), 0.25))
        assert rep.irreducible and rep.period == 1 and rep.aperiodic

    def test_two_cycle(self):
        rep = check_ergodicity(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert rep.irreducible and rep.period == 2 and not rep.aperiodic

    def test_three_cycle_with_chord(self):
        # cycle lengths 3 and 2 have gcd 1
        m = np.array([[0, 1, 0], [0.5, 0, 0.5], [1, 0, 0]], float)
        assert check_ergodicity(m).aperiodic
        m3 = np.roll(np.eye(3), 1, axis=1)
        assert check_ergodicity(m3).period == 3


class TestRandomMdp:
    def test_single(self):
        spec = random_mdp(1, 1, 0.5, seed=4)
        assert validate_mdp(spec) == []
        assert spec.p.shape == (1, 1, 1)

    def test_deterministic(self):
        assert random_mdp(3, 2, 0.9, seed=8) == random_mdp(3, 2, 0.9, seed=8)
        assert random_mdp(3, 2, 0.9, seed=8) != random_mdp(3, 2, 0.9, seed=9)

    @pytest.mark.parametrize("seed", range(10))
    def test_min_prob_ergodic(self, seed):
        spec = random_mdp(4, 3, 0.9, seed=seed, min_prob=0.01)
        assert spec.p.min() > 0
        rep = check_ergodicity(joint_kernel(spec, np.full((4, 3), 1 / 3)))
        assert rep.irreducible and rep.aperiodic

    def test_bad_args(self):
        with pytest.raises(ValueError):
            random_mdp(0, 2, 0.9, seed=0)
        with pytest.raises(ValueError):
            random_mdp(2, 2, 0.9, seed=0, min_prob=0.6)


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        spec = random_mdp(2, 2, 0.9, seed=7)
        path = save_mdp(spec, tmp_path / "m.json")
        assert load_mdp(path) == spec
        assert load_mdp(path).content_hash() == spec.content_hash()

    def test_renormalize_within_tolerance(self):
        doc = fixture("chainmdp").to_dict()
        doc["p"][0][0] = [0.9 + 4e-10, 0.1]
        spec = mdp_from_dict(doc)
        assert spec.p[0, 0].sum() == pytest.approx(1.0, abs=1e-15)

    def test_corrupt_rejected(self, tmp_path):
        doc = fixture("chainmdp").to_dict()
        doc["p"][1][1] = [0.8, 0.1]
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(ValidationError) as err:
            load_mdp(tmp_path / "bad.json")
        assert err.value.violations == ["row (1,1) sums to 0.9"]

    def test_malformed(self):
        with pytest.raises(ValidationError):
            mdp_from_dict({"p": [[[1.0]]]})
        doc = fixture("chainmdp").to_dict()
        doc["n_states"] = 3
        with pytest.raises(ValidationError):
            mdp_from_dict(doc)

    def test_arrays_read_only(self, chain):
        with pytest.raises(ValueError):
            chain.p[0, 0, 0] = 0.5


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), nx=st.integers(1, 5), na=st.integers(1, 3),
       gamma=st.floats(0.05, 0.99), scale=st.floats(0.1, 5.0))
def test_joint_kernels_stochastic_and_restart_ergodic(seed, nx, na, gamma, scale):
    spec = random_mdp(nx, na, gamma, seed)
    theta = np.random.default_rng(seed).normal(scale=scale, size=(nx, na))
    f = softmax_policy(theta)
    assert np.abs(restart_kernel(spec).sum(axis=2) - 1).max() <= 1e-12
    for construction in ("original", "restart"):
        assert np.abs(joint_kernel(spec, f, construction).matrix.sum(axis=1) - 1).max() <= 1e-9
    # mu has full support, so every state is reachable through a restart
    assert check_ergodicity(joint_kernel(spec, f, "restart")).ergodic
