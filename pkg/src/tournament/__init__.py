"""Mean-field tournaments ranked on terminal value.

Players steer a Brownian state at quadratic cost and are paid by their rank in
the population at the horizon. The package solves the equilibrium, designs
rewards, compares with the planner's optimum and checks results by simulation.
"""

from .best_response import BestResponse, ControlField, beta_of, best_response, objective, optimal_drift
from .core import ModelParams
from .design import (
    DesignConstraints,
    DesignSolution,
    design_net_profit,
    design_rank_alpha,
    design_total_effort,
    effort_limit,
    feasibility_interval,
    inverse_design,
    is_attainable,
    normalized_density,
)
from .equilibrium import (
    EquilibriumResult,
    equilibrium_mean_map,
    equilibrium_quantile,
    game_value,
    solve_equilibrium,
    solve_mean_fixed_point,
    total_effort,
    verify_fixed_point,
)
from .errors import (
    ConfigError,
    DomainError,
    InvalidReward,
    NotAttainable,
    NotFeasible,
    QuadratureError,
    SolverError,
    TournamentError,
    TrivialPoA,
    UnboundedValue,
)
from .grid import DistributionGrid, rank_grid, relative_entropy_to_prior
from .hitting_time import FirstPassageLaw, HittingReward, first_passage_cdf, first_passage_density, hitting_value
from .reward import (
    LinearQuantile,
    PiecewiseRank,
    PureRank,
    RankMean,
    RewardSpec,
    StateMean,
    constant,
    discretize_reward,
    eval_reward,
    lorenz_majorizes,
)
from .simulate import SimConfig, SimReport, sample_bridge_mixture, simulate_equilibrium
from .welfare import (
    WelfareReport,
    centralized_value_rank,
    centralized_value_state,
    price_of_anarchy,
    solve_lambda_m,
)

__version__ = "0.1.0"
