# %% [markdown]
# # Comparison equations
# Scalar ODEs that bound the critic error and the actor gap.

# %%
import numpy as np

from aclab.mdp import chain_mdp
from aclab.ode import GOLDEN, check_critic_comparison, comparison_ode_actor, comparison_ode_critic, integrate

# %%
ts, z = comparison_ode_critic(1.0, 1, 2.0, 1.0, 1e6, [1e3, 1e4, 1e5, 1e6])
print("Z log^4 t:", z * np.log(ts) ** 4)

# %% [markdown]
# Check the differential inequality on an actual critic trajectory, then the
# ordering `Y <= Z`.

# %%
spec = chain_mdp()
ts = np.geomspace(2.0, 1e3, 300)
tr = integrate(spec, np.zeros((2, 2)), np.zeros((2, 2)), 1e3, 1.0, 0.05, np.concatenate([[0.0], ts]))
chk = check_critic_comparison(ts, tr.Y[1:], C=0.01, n0=1)
print(chk.inequality_holds, chk.ordering_holds, chk.max_ordering_violation)

# %%
# X = Z log t is attracted to the golden ratio from either side
for z0 in (0.0, GOLDEN / np.log(2.0), 10 / np.log(2.0)):
    _, _, x = comparison_ode_actor(1.0, 2.0, z0, 1e6)
    print(f"X(2)={x[0]:.3f}  X(1e6)={x[-1]:.4f}")
