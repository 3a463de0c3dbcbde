import json

import numpy as np
import pytest

from aclab.exact import poisson_solution, stationary_distribution
from aclab.mdp import chain_mdp, joint_kernel, random_mdp, single_state_mdp
from aclab.online import (
    AcConfig,
    IncrementMonitor,
    empirical_fluctuation,
    init_run,
    iterate,
    make_rng,
    run,
    step,
    step_index,
)
from aclab.policy import RateSchedule, exploration_policy, softmax_policy, zeta_discrete


def test_step_index():
    assert step_index(200, 2.0) == 400
    assert step_index(3, 0.1 * 3) == 0
    assert step_index(10, 0.3) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        AcConfig(N=0, T=1)
    with pytest.raises(ValueError):
        AcConfig(N=10, T=1, checkpoint_times=[0.5, 0.2])
    with pytest.raises(ValueError):
        AcConfig(N=10, T=1, checkpoint_times=[2.0])
    with pytest.raises(ValueError):
        AcConfig(N=10, T=1, theta0=np.zeros((3, 3))).tables(chain_mdp())


class TestInit:
    def test_single_state(self):
        s = init_run(single_state_mdp(), AcConfig(N=5, T=1, seed=3))
        assert (s.x, s.a, s.xt, s.at) == (0, 0, 0, 0)

    def test_deterministic(self, chain):
        cfg = AcConfig(N=5, T=1, seed=42)
        assert init_run(chain, cfg).same_as(init_run(chain, cfg))
        assert not init_run(chain, cfg).same_as(init_run(chain, AcConfig(N=5, T=1, seed=43)))

    def test_initial_state_frequency(self, chain):
        xs = np.array([init_run(chain, AcConfig(N=1, T=1, seed=s)).x for s in range(10_000)])
        freq = (xs == 0).mean()
        se = np.sqrt(0.25 / xs.size)
        assert abs(freq - chain.mu[0]) <= 3 * se

    def test_run_ids_independent(self, chain):
        a = make_rng(1, 0).random(8)
        b = make_rng(1, 1).random(8)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, make_rng(1, 0).random(8))


class TestStep:
    def test_zero_alpha_freezes_critic(self, chain):
        q0 = np.array([[0.3, -2.0], [1.5, 4.0]])
        cfg = AcConfig(N=10, T=5, alpha=0.0, q0=q0, seed=1)
        for s in iterate(chain, cfg):
            np.testing.assert_array_equal(s.q, q0)

    def test_single_action_actor_constant(self):
        spec = single_state_mdp(0.5, 0.5, n_actions=1)
        cfg = AcConfig(N=4, T=5, q0=np.array([[3.0]]), seed=2)
        for s in iterate(spec, cfg):
            assert s.theta[0, 0] == 0.0

    def test_hand_computed_first_step(self, chain):
        theta0 = np.array([[0.2, -0.4], [1.0, 0.5]])
        q0 = np.array([[0.7, -0.1], [2.0, 1.2]])
        cfg = AcConfig(N=1, T=3, alpha=0.8, theta0=theta0, q0=q0, seed=17)
        s0 = init_run(chain, cfg)
        s1 = step(s0, chain, cfg)

        # replay the generator: four uniforms at init, four per step
        u = make_rng(17, 0).random(8)[4:]
        cdf = np.cumsum(chain.p[s0.x, s0.a])
        x1 = int(np.searchsorted(cdf, u[0], side="right"))
        assert s1.x == x1
        eta0 = 1.0
        g = exploration_policy(softmax_policy(theta0), eta0)
        td = chain.r[s0.x, s0.a] + chain.gamma * q0[x1] @ g[x1] - q0[s0.x, s0.a]
        q1 = q0.copy()
        q1[s0.x, s0.a] += 0.8 * td
        np.testing.assert_allclose(s1.q, q1, rtol=0, atol=1e-15)

        f = softmax_policy(theta0)
        th1 = theta0.copy()
        for a in range(2):
            th1[s0.xt, a] += zeta_discrete(0, 1) * q0[s0.xt, s0.at] * ((a == s0.at) - f[s0.xt, a])
        np.testing.assert_allclose(s1.theta, th1, rtol=0, atol=1e-15)

        restart = chain.gamma * chain.p + (1 - chain.gamma) * chain.mu
        assert s1.xt == int(np.searchsorted(np.cumsum(restart[s0.xt, s0.at]), u[1], side="right"))
        g1 = exploration_policy(softmax_policy(th1), 1 / (1 + np.log(2.0) ** 2))
        assert s1.a == int(np.searchsorted(np.cumsum(g1[s1.x]), u[2], side="right"))
        f1 = softmax_policy(th1)
        assert s1.at == int(np.searchsorted(np.cumsum(f1[s1.xt]), u[3], side="right"))

    def test_exhausted(self, chain):
        cfg = AcConfig(N=2, T=1)
        states = list(iterate(chain, cfg))
        assert states[-1].k == 2
        with pytest.raises(RuntimeError):
            step(states[-1], chain, cfg)


class TestRun:
    def test_zero_horizon(self, chain):
        q0 = np.ones((2, 2))
        tr = run(chain, AcConfig(N=10, T=0, q0=q0, checkpoint_times=[0.0]))
        assert tr.thetas.shape == (1, 2, 2)
        np.testing.assert_array_equal(tr.qs[0], q0)
        np.testing.assert_array_equal(tr.thetas[0], 0.0)

    def test_refined_checkpoints_agree(self, chain):
        coarse = run(chain, AcConfig(N=50, T=2, seed=5, checkpoint_times=[0, 1, 2]))
        fine = run(chain, AcConfig(N=50, T=2, seed=5, checkpoint_times=[0, 0.5, 1, 1.5, 2]))
        np.testing.assert_array_equal(coarse.thetas, fine.thetas[::2])
        np.testing.assert_array_equal(coarse.qs, fine.qs[::2])

    def test_bitwise_reproducible(self, chain):
        cfg = AcConfig(N=100, T=1, seed=9, checkpoint_times=[0.25, 1.0])
        a, b = run(chain, cfg), run(chain, cfg)
        assert a.thetas.tobytes() == b.thetas.tobytes() and a.qs.tobytes() == b.qs.tobytes()
        np.testing.assert_array_equal(a.steps, [25, 100])

    def test_a_priori_growth_bound(self, chain):
        N, T, alpha = 10_000, 2.0, 1.0
        q0 = np.full((2, 2), 0.5)
        cfg = AcConfig(N=N, T=T, alpha=alpha, q0=q0, seed=3)
        mon = IncrementMonitor(chain, cfg)
        run(chain, cfg, monitor=mon)
        bound = (0.5 + alpha * (2 + chain.gamma) * T) * np.exp(alpha * (1 + chain.gamma) * T)
        assert mon.ok, mon.violations[:3]
        assert mon.steps == N * T
        assert mon.max_q <= bound

    def test_monitor_flags_bad_increments(self, chain):
        cfg = AcConfig(N=10, T=1)
        s0 = init_run(chain, cfg)
        s1 = step(s0, chain, cfg)
        s1.q[1 - s0.x, 1 - s0.a] += 1.0
        mon = IncrementMonitor(chain, cfg)
        mon(s0, s1)
        assert not mon.ok

    def test_csv_export(self, chain, tmp_path):
        tr = run(chain, AcConfig(N=20, T=1, seed=1, checkpoint_times=[0, 1]))
        path = tr.write_csv(tmp_path / "run.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,a,theta,q"
        assert len(lines) == 1 + 2 * 4
        assert lines[-1].startswith("1.0,1,1,")
        meta = json.loads((tmp_path / "run.json").read_text())
        assert meta["mdp_hash"] == chain.content_hash()
        assert meta["config"]["N"] == 20


def test_frozen_visit_frequencies_match_stationary(chain):
    # theta stays 0, so g is uniform whatever eta is
    N, T = 1, 40_000
    cfg = AcConfig(N=N, T=T, seed=21, frozen=True)
    counts = np.zeros(4)
    for s in iterate(chain, cfg):
        counts[s.x * 2 + s.a] += 1
    kernel = joint_kernel(chain, np.full((2, 2), 0.5))
    pi = stationary_distribution(kernel)
    n = counts.sum()
    # 3-sigma band from the Markov-chain CLT variance, computed from the Poisson solution
    var = np.empty(4)
    for xi in range(4):
        h = -np.full(4, pi[xi])
        h[xi] += 1.0
        var[xi] = 2 * pi @ (h * poisson_solution(kernel, pi, xi)) - pi[xi] * (1 - pi[xi])
    band = 3 * np.sqrt(var / n)
    assert np.all(np.abs(counts / n - pi) <= band)


class TestFluctuation:
    def test_single_state_zero(self):
        fl = empirical_fluctuation(single_state_mdp(0.5, 0.5), AcConfig(N=10, T=2, seed=0))
        assert fl.actor_l1 == 0.0
        assert fl.critic_l1 == pytest.approx(0.0, abs=1e-14)

    def test_size_guard(self):
        spec = random_mdp(9, 8, 0.9, seed=0)
        with pytest.raises(ValueError):
            empirical_fluctuation(spec, AcConfig(N=1, T=1))

    def test_frozen_clt_band(self, chain):
        comps = []
        for seed in range(100):
            fl = empirical_fluctuation(chain, AcConfig(N=200, T=2, seed=seed, q0=np.array([[0.5, 1.0], [2.0, 1.5]]),
                                                       frozen=True))
            comps.append(np.concatenate([fl.actor.ravel()] + [m.ravel() for m in fl.critic_parts]))
        comps = np.array(comps)
        mean, sd = comps.mean(axis=0), comps.std(axis=0, ddof=1)
        assert np.all(np.abs(mean) <= 4 * sd / 10 + 1e-15)


def test_schedule_is_used(chain):
    cfg = AcConfig(N=10, T=1, seed=4, q0=np.ones((2, 2)), schedule=RateSchedule.constant(0.0, 0.5))
    for s in iterate(chain, cfg):
        np.testing.assert_array_equal(s.theta, 0.0)
