import json

import numpy as np
import pytest

from aclab.experiments import ExperimentConfig, run_experiment
from aclab.mdp import MdpSpec, save_mdp


def quick(experiment, **kw):
    base = dict(N_grid=[50, 200], seeds=[0, 1, 2], T=1.0)
    base.update(kw)
    return ExperimentConfig(experiment, **base)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ExperimentConfig("ode-limit", N_grid=[])
        with pytest.raises(ValueError):
            ExperimentConfig("ode-limit", seeds=[1, 1])
        with pytest.raises(ValueError):
            ExperimentConfig("ode-limit", thresholds={"bogus": 1.0})

    def test_unknown_experiment(self):
        with pytest.raises(ValueError):
            run_experiment(ExperimentConfig("nope"))

    def test_sigma_mass_defaults(self):
        assert ExperimentConfig("ode-limit").mass == "normalized"
        assert ExperimentConfig("actor-rate").mass == "unnormalized"
        assert ExperimentConfig("critic-rate", sigma_mass="normalized").mass == "normalized"

    def test_from_file_and_sources(self, tmp_path, chain):
        save_mdp(chain, tmp_path / "m.json")
        (tmp_path / "c.json").write_text(json.dumps({"experiment": "fluctuation", "mdp": str(tmp_path / "m.json"),
                                                     "thresholds": {"fluctuation_factor": 3}}))
        cfg = ExperimentConfig.from_file(tmp_path / "c.json", workers=None)
        assert cfg.load_spec() == chain
        assert cfg.threshold("fluctuation_factor") == 3
        assert cfg.threshold("actor_burn_in") == 10
        rnd = ExperimentConfig("ode-limit", mdp={"n_states": 3, "n_actions": 2, "gamma": 0.9, "seed": 4})
        assert rnd.load_spec().n_states == 3

    def test_bellman_initial_tables(self, constant):
        cfg = ExperimentConfig("critic-rate", mdp="constant", q0="bellman")
        _, q = cfg.initial_tables(constant)
        np.testing.assert_allclose(q, 0.5 / 0.1)


class TestOdeLimit:
    def test_degenerate_single_state(self):
        rep = run_experiment(ExperimentConfig("ode-limit", mdp="single", N_grid=[200, 3200], seeds=list(range(5))))
        assert rep.means[-1] <= 1e-2

    def test_report_files_and_reproducibility(self, tmp_path):
        cfg = quick("ode-limit", seeds=[4])
        a = run_experiment(cfg, tmp_path / "a")
        b = run_experiment(cfg, tmp_path / "b")
        for name in ("raw.csv", "report.json", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        report = json.loads((tmp_path / "a" / "report.json").read_text())
        assert report["passed"] == a.passed
        assert set(report["verdicts"]) == {"strictly_decreasing", "final_le_factor_of_first"}
        assert b.raw_csv().splitlines()[0] == "N,seed,sup_error_l2,sup_error_sup"

    def test_seed_order_and_workers(self):
        a = run_experiment(quick("ode-limit", seeds=[0, 1, 2]))
        b = run_experiment(quick("ode-limit", seeds=[2, 0, 1], workers=2))
        np.testing.assert_allclose(a.means, b.means, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.stds, b.stds, rtol=0, atol=1e-12)
        assert a.raw_csv() == b.raw_csv()

    def test_verdicts_reproducible_from_raw(self):
        rep = run_experiment(quick("ode-limit"))
        rows = np.array(rep.rows)
        means = [rows[rows[:, 0] == N, 2].mean() for N in rep.grid]
        np.testing.assert_allclose(means, rep.means)
        assert rep.verdicts["strictly_decreasing"] == bool(np.all(np.diff(means) < 0))


class TestFluctuation:
    def test_single_state_zero(self):
        rep = run_experiment(quick("fluctuation", mdp="single"))
        assert max(rep.means) == 0.0
        assert max(rep.extra["critic_means"]) <= 1e-14

    def test_frozen_band(self):
        rep = run_experiment(ExperimentConfig("fluctuation", N_grid=[200], T=2.0, seeds=list(range(100)),
                                              frozen=True, q0=[[0.5, 1.0], [2.0, 1.5]]))
        assert rep.verdicts["zero_mean_clt_band"]


@pytest.fixture(scope="module")
def gamma_half():
    return run_experiment(ExperimentConfig("critic-rate", mdp="chainmdp-gamma0.5"))


@pytest.fixture(scope="module")
def near_optimal():
    return run_experiment(ExperimentConfig("actor-rate", theta0=[[0.0, 5.0], [5.0, 0.0]], t_grid=[100.0]))


class TestRates:
    def test_critic_constant_converged(self):
        cfg = ExperimentConfig("critic-rate", mdp="constant", q0="bellman", schedule="constant:0.0,0.2",
                               t_grid=[10.0, 100.0])
        rep = run_experiment(cfg)
        assert rep.extra["max_error"] <= 1e-8

    def test_critic_gamma_half_decreasing(self, gamma_half):
        assert gamma_half.verdicts["strictly_decreasing"]
        # the distance to the exploration-policy values does decay faster than 1/log^2 t
        rows = {r[0]: r for r in gamma_half.rows}
        err_g = [rows[t][2] for t in gamma_half.grid]
        c = err_g[0] * np.log(gamma_half.grid[0]) ** 2
        assert all(e <= c / np.log(t) ** 2 for t, e in zip(gamma_half.grid, err_g))

    @pytest.mark.xfail(strict=True, reason="distance to V^f is dominated by the exploration bias, "
                                           "which decays like 1/(1 + log^2(t+1)) and so exceeds c/log^2 t "
                                           "once anchored at an already-converged critic")
    def test_critic_gamma_half_dominated(self, gamma_half):
        assert gamma_half.verdicts["dominated_by_c_over_log2"]

    def test_actor_constant_zero_gap(self):
        rep = run_experiment(ExperimentConfig("actor-rate", mdp="constant", t_grid=[100.0]))
        assert np.max(np.abs(rep.means)) <= 1e-10

    def test_actor_near_optimal_improves(self, near_optimal):
        ex = near_optimal.extra
        assert ex["final_gap"] < ex["gap_at_burn_in"] < ex["gap_at_0"]

    @pytest.mark.xfail(strict=True, reason="softmax gradients at +5 logits are ~exp(-5) smaller, "
                                           "so the gap shrinks by only ~15% by t=10")
    def test_actor_near_optimal_halves_by_burn_in(self, near_optimal):
        assert near_optimal.extra["gap_at_burn_in"] <= near_optimal.extra["gap_at_0"] / 2

    def test_actor_requires_full_support(self, tmp_path):
        spec = MdpSpec(np.full((2, 2, 2), 0.5), [1.0, 0.0], np.eye(2), 0.9)
        save_mdp(spec, tmp_path / "m.json")
        with pytest.raises(ValueError):
            run_experiment(ExperimentConfig("actor-rate", mdp=str(tmp_path / "m.json"), t_grid=[20.0]))
