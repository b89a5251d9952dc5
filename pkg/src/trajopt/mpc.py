"""Receding-horizon loop: plan, execute the first action, replan."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GaussianPlanDistribution, ParameterError, PlannerParams, RngStream
from .diffenv import EnvSpec, PointMassState, reward, step
from .planners import get_planner


@dataclass(frozen=True)
class EpisodeResult:
    executed_actions: list
    visited_states: list
    realized_return: float
    per_step_plan_returns: list

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.visited_states])


def run_episode(env: EnvSpec, planner: str, params: PlannerParams, s0: PointMassState,
                L: int, rng: RngStream, warm_start: bool = False) -> EpisodeResult:
    """Run ``L`` environment steps, replanning from scratch at each one.

    Step ``l`` plans with ``rng.substream("step", l)``.  With ``warm_start``
    the previous plan, shifted by one step and zero padded, seeds the mean of
    the next search (unit variance); otherwise every search starts at N(0, I).
    """
    if L < 1:
        raise ParameterError(f"episode length must be >= 1, got {L}")
    plan = get_planner(planner)
    state = s0
    actions, states, plan_returns = [], [s0], []
    total = 0.0
    initial = None
    for l in range(L):
        outcome = plan(env, state, params, rng.substream("step", l), initial=initial)
        a0 = outcome.best_actions[0].copy()
        state = step(state, a0, env)
        total += reward(state, env)
        actions.append(a0)
        states.append(state)
        plan_returns.append(outcome.best_return)
        if warm_start:
            shifted = np.vstack([outcome.best_actions[1:], np.zeros((1, env.dim))])
            initial = GaussianPlanDistribution(shifted, np.ones_like(shifted))
    return EpisodeResult(actions, states, total, plan_returns)
