# %% [markdown]
# # The limit ODE
# As N grows the rescaled actor-critic tracks a deterministic system. Here
# we integrate it with fixed-step RK4 and compare against one stochastic run.

# %%
import numpy as np

from aclab.mdp import chain_mdp
from aclab.ode import integrate, rk4_error_ratio
from aclab.online import AcConfig, run

spec = chain_mdp()
zero = np.zeros((2, 2))
ck = np.linspace(0, 2, 5)

# %%
ode = integrate(spec, zero, zero, 2.0, 1.0, 1e-3, ck)
sim = run(spec, AcConfig(N=3200, T=2.0, seed=0, checkpoint_times=list(ck)))
for i, t in enumerate(ck):
    d = np.linalg.norm(sim.thetas[i] - ode.thetas[i]) + np.linalg.norm(sim.qs[i] - ode.qs[i])
    print(f"t={t:.1f}  |stochastic - ODE| = {d:.4f}")

# %%
print("RK4 error ratio under step halving:", rk4_error_ratio(spec))

# %% [markdown]
# Long horizon: the critic error shrinks and the actor approaches the
# optimal policy. The unnormalized occupancy drives the actor here.

# %%
ck = np.concatenate([[0.0], np.geomspace(1, 1e3, 7)])
tr = integrate(spec, zero, zero, 1e3, 1.0, 0.1, ck, sigma_mass="unnormalized")
for t, y, gap, m in zip(tr.times, tr.Y, tr.J_gap, tr.min_optimal_mass):
    print(f"t={t:8.1f}  Y={y:.3e}  J gap={gap:.4f}  min f(x, a*)={m:.3f}")
