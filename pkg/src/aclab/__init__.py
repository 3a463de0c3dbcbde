"""Online actor-critic on finite MDPs: simulator, limit ODE and exact oracles."""
from .exact import (
    lojasiewicz_bounds,
    mixing_profile,
    objective,
    optimal_policy,
    performance_difference,
    poisson_solution,
    policy_gradient,
    stationary_distribution,
    value_functions,
    visiting_measures,
)
from .experiments import ExperimentConfig, TrendReport, run_experiment
from .mdp import (
    ErgodicityError,
    MdpSpec,
    StateActionKernel,
    ValidationError,
    check_ergodicity,
    fixture,
    joint_kernel,
    load_mdp,
    random_mdp,
    restart_kernel,
    save_mdp,
    validate_mdp,
)
from .ode import OdeBlowUp, OdeState, comparison_ode_actor, comparison_ode_critic, critic_error, integrate, ode_rhs
from .online import AcConfig, IncrementMonitor, empirical_fluctuation, init_run, iterate, run, step
from .policy import RateSchedule, check_rate_properties, exploration_policy, log_policy_gradient, softmax_policy

__version__ = "0.1.0"
