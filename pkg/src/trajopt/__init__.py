"""Sampling, gradient and hybrid trajectory planners for a differentiable point mass."""
from .core import (
    VAR_FLOOR,
    GaussianPlanDistribution,
    InvalidDistributionError,
    InvalidReturnError,
    ParameterError,
    PlannerParams,
    RngStream,
    fit_elites,
    sample_action_sequences,
    sort_indices_by_return,
)
from .diffenv import (
    EnvSpec,
    Obstacle,
    PointMassState,
    RolloutResult,
    contact_force,
    dim_sweep_env,
    finite_diff_grad,
    obstacle_sweep_env,
    reward,
    rollout,
    rollout_with_grad,
    step,
)
from .kernels import BACKEND
from .mpc import EpisodeResult, run_episode
from .planners import PlanOutcome, cem_plan, grad_plan, gradcem_plan, sgd_ascent_step

__version__ = "0.1.0"
