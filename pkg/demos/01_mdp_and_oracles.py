# %% [markdown]
# # Finite MDPs and their exact oracles
# Build the two-state chain fixture, look at its kernels, and compute the
# quantities every stochastic result is later compared against.

# %%
import numpy as np

from aclab import exact
from aclab.mdp import chain_mdp, check_ergodicity, joint_kernel, random_mdp, restart_kernel
from aclab.policy import exploration_policy, softmax_policy
from aclab.verify import finite_difference_gradient

np.set_printoptions(precision=4, suppress=True)
spec = chain_mdp()
print("p[x, a, x']\n", spec.p)

# %% [markdown]
# The restart kernel follows `p` with probability gamma and otherwise redraws
# the state from `mu`.

# %%
print(restart_kernel(spec)[0])

# %%
# uniform policy; state-action pairs are flattened as x * n_actions + a
f = np.full((2, 2), 0.5)
k = joint_kernel(spec, f)
print(k.matrix)
print(check_ergodicity(k))

# %% [markdown]
# Values, occupancy measures and the optimal policy, all by dense solves.

# %%
vp = exact.value_functions(spec, f)
vm = exact.visiting_measures(spec, f)
print("V(x) =", vp.v_state, " J =", exact.objective(spec, f))
print("sigma mass", vm.sigma.sum(), "normalized", vm.sigma_normalized.sum())
f_star, j_star = exact.optimal_policy(spec)
print("f* =\n", f_star, "\nJ* =", j_star)

# %%
# the stationary law of the restart chain is the normalized occupancy measure
pi = exact.stationary_distribution(joint_kernel(spec, f, "restart"))
print(pi, vm.sigma_normalized.ravel())

# %% [markdown]
# Policy gradient against central differences on a random MDP.

# %%
rnd = random_mdp(4, 3, 0.9, seed=2, min_prob=0.01)
theta = np.random.default_rng(0).normal(size=(4, 3))
g = exact.policy_gradient(rnd, theta)
print("max |grad - fd| =", np.abs(g - finite_difference_gradient(rnd, theta)).max())

# %%
# Lojasiewicz bounds along a few random parameters
for seed in range(3):
    th = np.random.default_rng(seed).normal(scale=2, size=(2, 2))
    rep = exact.lojasiewicz_bounds(spec, th, f_star)
    print(f"|grad|={rep.grad_norm:.4f} >= {rep.rhs_unique:.4f}  gap={rep.gap:.4f}")

# %%
# mixing of an exploration-policy chain and the Poisson equation
kern = joint_kernel(spec, exploration_policy(softmax_policy(np.array([[2.0, 0.0], [2.0, 0.0]])), 0.1))
prof = exact.mixing_profile(kern, n_max=40)
print(f"rate {prof.rate:.4f}, R^2 {prof.r_squared:.5f}")
pi = exact.stationary_distribution(kern)
print(exact.poisson_solution(kern, pi, 0))
