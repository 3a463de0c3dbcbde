# %% [markdown]
# # Experiment harness
# Small versions of the four experiments. Each returns a report with means,
# verdicts, and the raw per-seed rows that produced them.

# %%
import tempfile

from aclab.experiments import ExperimentConfig, run_experiment

# %%
rep = run_experiment(ExperimentConfig("ode-limit", N_grid=[100, 400, 1600], seeds=list(range(5)), T=1.0))
print(rep.grid, [round(m, 4) for m in rep.means], rep.verdicts)

# %%
rep = run_experiment(ExperimentConfig("fluctuation", N_grid=[100, 1600], seeds=list(range(5)), T=1.0))
print(rep.means, rep.verdicts)

# %%
rep = run_experiment(ExperimentConfig("actor-rate", t_grid=[1e2]))
print(rep.extra, rep.verdicts)

# %%
# artifacts: config.json, raw.csv, report.json
with tempfile.TemporaryDirectory() as out:
    cfg = ExperimentConfig("critic-rate", t_grid=[10.0, 100.0])
    run_experiment(cfg, out)
    print(open(f"{out}/raw.csv").read()[:300])
