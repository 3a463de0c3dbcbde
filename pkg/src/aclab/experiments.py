"""Seeded experiments that turn the convergence claims into pass/fail trends.

Each experiment is a pure function of its :class:`ExperimentConfig`. Raw
per-seed values are sorted by ``(grid point, seed)`` before aggregation and
export, so reports do not depend on seed order or worker count.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import exact
from .mdp import MdpSpec, fixture, load_mdp, random_mdp
from .ode import integrate
from .online import AcConfig, empirical_fluctuation, run
from .policy import schedule_by_name

DEFAULT_THRESHOLDS = {
    "ode_limit_factor": 0.5,
    "fluctuation_factor": 2.0,
    "fluctuation_grid_ratio": 16.0,
    "actor_burn_in": 10.0,
    "actor_gap_factor": 1.0 / 3.0,
    "actor_mass_from": 100.0,
    "clt_sigmas": 4.0,
}


@dataclass
class ExperimentConfig:
    experiment: str
    mdp: str | dict = "chainmdp"
    N_grid: list[int] = field(default_factory=lambda: [200, 800, 3200])
    T: float = 2.0
    alpha: float = 1.0
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    h: float = 1e-3
    checkpoints: list[float] | None = None
    t_grid: list[float] = field(default_factory=lambda: [1e2, 1e3, 1e4])
    schedule: str = "paper"
    sigma_mass: str | None = None
    theta0: list | None = None
    q0: list | str | None = None
    frozen: bool = False
    workers: int = 1
    out_dir: str | None = None
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.N_grid or not self.seeds or not self.t_grid:
            raise ValueError("grids and seed list must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise ValueError(f"unknown thresholds {sorted(unknown)}")

    @classmethod
    def from_file(cls, path, **overrides) -> ExperimentConfig:
        doc = json.loads(Path(path).read_text())
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    @property
    def mass(self) -> str:
        """Actor measure for the ODE: the rate experiments default to the unnormalized occupancy."""
        if self.sigma_mass is not None:
            return self.sigma_mass
        return "unnormalized" if self.experiment in ("critic-rate", "actor-rate") else "normalized"

    def threshold(self, name: str) -> float:
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])

    def load_spec(self) -> MdpSpec:
        if isinstance(self.mdp, dict):
            return random_mdp(**self.mdp)
        if Path(self.mdp).suffix == ".json":
            return load_mdp(self.mdp)
        return fixture(self.mdp)

    def initial_tables(self, spec: MdpSpec):
        shape = (spec.n_states, spec.n_actions)
        theta = np.zeros(shape) if self.theta0 is None else np.array(self.theta0, float)
        if self.q0 == "bellman":
            q = exact.value_functions(spec, exact.softmax_policy(theta)).v_state_action
        else:
            q = np.zeros(shape) if self.q0 is None else np.array(self.q0, float)
        return theta, q


@dataclass
class TrendReport:
    experiment: str
    grid: list
    means: list
    stds: list
    verdicts: dict
    columns: list[str]
    rows: list[list]
    slopes: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def raw_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        d.pop("columns")
        d["passed"] = self.passed
        return d

    def write(self, out_dir, config: ExperimentConfig) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(asdict(config), indent=1, sort_keys=True))
        (out / "raw.csv").write_text(self.raw_csv())
        (out / "report.json").write_text(json.dumps(self.summary(), indent=1, sort_keys=True, default=float))
        return out


def _strictly_decreasing(values) -> bool:
    return bool(np.all(np.diff(np.asarray(values, float)) < 0))


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _grouped(rows, key_col: int, val_col: int, grid):
    means, stds = [], []
    for g in grid:
        vals = np.array([r[val_col] for r in rows if r[key_col] == g])
        means.append(float(np.mean(vals)))
        stds.append(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
    return means, stds


def ode_limit_checkpoints(config: ExperimentConfig) -> np.ndarray:
    if config.checkpoints is not None:
        return np.array(config.checkpoints, float)
    return np.linspace(0.0, config.T, 41)


def _ode_limit_task(args):
    config, N, seed, ref_thetas, ref_qs = args
    spec = config.load_spec()
    theta0, q0 = config.initial_tables(spec)
    ck = ode_limit_checkpoints(config)
    ac = AcConfig(N=N, T=config.T, alpha=config.alpha, theta0=theta0, q0=q0, seed=seed,
                  checkpoint_times=list(ck), schedule=schedule_by_name(config.schedule))
    tr = run(spec, ac)
    n = len(ck)
    dth = (tr.thetas - ref_thetas).reshape(n, -1)
    dq = (tr.qs - ref_qs).reshape(n, -1)
    l2 = np.linalg.norm(dth, axis=1) + np.linalg.norm(dq, axis=1)
    sup = np.abs(dth).max(axis=1) + np.abs(dq).max(axis=1)
    return [N, seed, float(l2.max()), float(sup.max())]


def exp_ode_limit(config: ExperimentConfig) -> TrendReport:
    """Sup-over-checkpoints distance between stochastic runs and one shared ODE reference."""
    spec = config.load_spec()
    theta0, q0 = config.initial_tables(spec)
    ck = ode_limit_checkpoints(config)
    ref = integrate(spec, theta0, q0, config.T, config.alpha, config.h, ck,
                    schedule_by_name(config.schedule), config.mass, diagnostics=False)
    tasks = [(config, N, s, ref.thetas, ref.qs) for N in config.N_grid for s in sorted(config.seeds)]
    rows = sorted(_map(_ode_limit_task, tasks, config.workers), key=lambda r: (r[0], r[1]))
    grid = sorted(config.N_grid)
    means, stds = _grouped(rows, 0, 2, grid)
    sup_means, _ = _grouped(rows, 0, 3, grid)
    slope = float(np.polyfit(np.log(grid), np.log(means), 1)[0]) if len(grid) > 1 else float("nan")
    verdicts = {
        "strictly_decreasing": _strictly_decreasing(means),
        "final_le_factor_of_first": bool(means[-1] <= config.threshold("ode_limit_factor") * means[0]),
    }
    return TrendReport("ode-limit", grid, means, stds, verdicts,
                       ["N", "seed", "sup_error_l2", "sup_error_sup"], rows,
                       {"log_error_vs_log_N": slope}, {"sup_norm_means": sup_means})


def _fluctuation_task(args):
    config, N, seed = args
    spec = config.load_spec()
    theta0, q0 = config.initial_tables(spec)
    ac = AcConfig(N=N, T=config.T, alpha=config.alpha, theta0=theta0, q0=q0, seed=seed,
                  schedule=schedule_by_name(config.schedule), frozen=config.frozen)
    fl = empirical_fluctuation(spec, ac)
    parts = [fl.actor.ravel()] + [m.ravel() for m in fl.critic_parts]
    return [N, seed, fl.actor_l1, fl.critic_l1] + [float(v) for v in np.concatenate(parts)]


def exp_fluctuation(config: ExperimentConfig) -> TrendReport:
    """Magnitude of the stochastic error terms at the horizon, per ``N``."""
    spec = config.load_spec()
    tasks = [(config, N, s) for N in config.N_grid for s in sorted(config.seeds)]
    rows = sorted(_map(_fluctuation_task, tasks, config.workers), key=lambda r: (r[0], r[1]))
    grid = sorted(config.N_grid)
    means, stds = _grouped(rows, 0, 2, grid)
    critic_means, critic_stds = _grouped(rows, 0, 3, grid)
    verdicts = {}
    if len(grid) > 1:
        fac = config.threshold("fluctuation_factor")
        verdicts["grid_ratio_ok"] = grid[-1] / grid[0] >= config.threshold("fluctuation_grid_ratio")
        verdicts["actor_decay"] = means[0] >= fac * means[-1]
        verdicts["critic_decay"] = critic_means[0] >= fac * critic_means[-1]
    names = [f"{kind}[{x},{a}]" for kind in ("M_actor", "M1", "M2", "M3")
             for x in range(spec.n_states) for a in range(spec.n_actions)]
    extra = {"critic_means": critic_means, "critic_stds": critic_stds}
    if config.frozen:
        band = []
        for N in grid:
            comps = np.array([r[4:] for r in rows if r[0] == N])
            n = comps.shape[0]
            mean, sd = comps.mean(axis=0), comps.std(axis=0, ddof=1)
            band.append(bool(np.all(np.abs(mean) <= config.threshold("clt_sigmas") * sd / np.sqrt(n) + 1e-15)))
        verdicts["zero_mean_clt_band"] = all(band)
    return TrendReport("fluctuation", grid, means, stds, verdicts,
                       ["N", "seed", "actor_l1", "critic_l1"] + names, rows, {}, extra)


def _long_horizon(config: ExperimentConfig, spec: MdpSpec):
    theta0, q0 = config.initial_tables(spec)
    T = max(config.t_grid)
    ck = np.unique(np.concatenate([[0.0], np.geomspace(1.0, T, 41), config.t_grid,
                                   [config.threshold("actor_burn_in")]]))
    ck = ck[ck <= T]
    h = config.h if config.h >= 1e-2 else 1e-1
    return integrate(spec, theta0, q0, T, config.alpha, h, ck,
                     schedule_by_name(config.schedule), config.mass)


def exp_critic_rate(config: ExperimentConfig) -> TrendReport:
    """Distance of the ODE critic to the softmax-policy values at long times."""
    spec = config.load_spec()
    tr = _long_horizon(config, spec)
    rows = [[float(t), float(e), float(np.sqrt(2 * y)), float(y)]
            for t, e, y in zip(tr.times, tr.critic_error_f, tr.Y)]
    grid = sorted(config.t_grid)
    at = {float(t): e for t, e in zip(tr.times, tr.critic_error_f)}
    errs = [float(at[float(t)]) for t in grid]
    c = errs[0] * np.log(grid[0]) ** 2
    verdicts = {
        "strictly_decreasing": _strictly_decreasing(errs),
        "dominated_by_c_over_log2": all(e <= c / np.log(t) ** 2 for t, e in zip(grid, errs)),
    }
    slope = float(np.polyfit(np.log(np.log(grid)), np.log(np.maximum(errs, 1e-300)), 1)[0]) if len(grid) > 1 else float("nan")
    return TrendReport("critic-rate", grid, errs, [0.0] * len(grid), verdicts,
                       ["t", "critic_error_f", "critic_error_g", "Y"], rows,
                       {"log_error_vs_log_log_t": slope}, {"c": float(c), "max_error": float(np.max(tr.critic_error_f))})


def exp_actor_rate(config: ExperimentConfig) -> TrendReport:
    """Suboptimality gap and optimal-action mass of the ODE actor at long times."""
    spec = config.load_spec()
    if np.any(spec.mu <= 0):
        raise ValueError("actor-rate experiment requires mu with full support")
    tr = _long_horizon(config, spec)
    rows = [[float(t), float(g), float(m), float(n)]
            for t, g, m, n in zip(tr.times, tr.J_gap, tr.min_optimal_mass, tr.grad_norm)]
    burn = config.threshold("actor_burn_in")
    after = tr.times >= burn
    gaps = tr.J_gap[after]
    mass = tr.min_optimal_mass[after]
    late = tr.min_optimal_mass[tr.times >= config.threshold("actor_mass_from")]
    verdicts = {
        "gap_decreasing_after_burn_in": _strictly_decreasing(gaps),
        "final_gap_le_factor": bool(gaps[-1] <= config.threshold("actor_gap_factor") * gaps[0]),
        "optimal_mass_nondecreasing": bool(np.all(np.diff(mass) >= -1e-12)),
        "optimal_mass_above_burn_in_value": bool(np.all(late >= mass[0] - 1e-12)),
    }
    grid = [float(t) for t in tr.times]
    return TrendReport("actor-rate", grid, [float(g) for g in tr.J_gap], [0.0] * len(grid), verdicts,
                       ["t", "J_gap", "min_optimal_mass", "grad_norm"], rows, {},
                       {"gap_at_burn_in": float(gaps[0]), "final_gap": float(gaps[-1]),
                        "gap_at_0": float(tr.J_gap[0])})


EXPERIMENTS = {
    "ode-limit": exp_ode_limit,
    "fluctuation": exp_fluctuation,
    "critic-rate": exp_critic_rate,
    "actor-rate": exp_actor_rate,
}


def run_experiment(config: ExperimentConfig, out_dir=None) -> TrendReport:
    """Run ``config.experiment``; write artifacts to ``out_dir`` (or ``config.out_dir``) if given."""
    try:
        fn = EXPERIMENTS[config.experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {config.experiment!r}; choose from {sorted(EXPERIMENTS)}") from None
    report = fn(config)
    out_dir = out_dir if out_dir is not None else config.out_dir
    if out_dir is not None:
        report.write(out_dir, config)
    return report
