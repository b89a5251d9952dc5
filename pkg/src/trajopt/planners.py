"""CEM, pure gradient ascent, and CEM interleaved with gradient ascent.

All three share the initial population: ``G`` draws from N(0, I) keyed by
``rng.substream("sample", 0)``.  Resampling at iteration ``t`` uses
``rng.substream("sample", t)``, so CEM and Grad+CEM see identical noise and
Grad+CEM with ``J=0`` reproduces CEM exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    GaussianPlanDistribution,
    ParameterError,
    PlannerParams,
    RngStream,
    fit_elites,
    sample_action_sequences,
    sort_indices_by_return,
)
from .diffenv import EnvSpec, PointMassState, evaluate, evaluate_with_grad


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class PlanOutcome:
    best_actions: np.ndarray
    best_return: float
    # (T, 2): best return in population, mean population return
    trace: np.ndarray
    distribution: GaussianPlanDistribution | None = None


# called as (iteration, population, returns, order) after each evaluation
IterationHook = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def sgd_ascent_step(actions, grad, beta: float) -> np.ndarray:
    a = np.asarray(actions, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if a.shape != g.shape:
        raise ParameterError(f"actions {a.shape} and gradient {g.shape} shapes differ")
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    return a + beta * g


def _clip(grads: np.ndarray, max_norm: float) -> np.ndarray:
    norms = np.sqrt(np.sum(grads * grads, axis=(1, 2)))
    scale = np.minimum(1.0, max_norm / np.maximum(norms, 1e-300))
    return grads * scale[:, None, None]


def _ascend(env, s0, pop, params):
    _, grads = evaluate_with_grad(env, s0, pop)
    if not np.all(np.isfinite(grads)):
        raise NumericalError("non-finite gradient")
    if params.clip_grad:
        grads = _clip(grads, params.clip_norm)
    return sgd_ascent_step(pop, grads, params.step_size(env.dim))


def _evaluate(env, s0, pop):
    returns = evaluate(env, s0, pop)
    if not np.all(np.isfinite(returns)):
        raise NumericalError("non-finite return")
    return returns


def _initial(env: EnvSpec, initial: GaussianPlanDistribution | None):
    if initial is None:
        return GaussianPlanDistribution.standard(env.horizon, env.dim)
    if initial.shape != (env.horizon, env.dim):
        raise ParameterError(f"initial distribution shape {initial.shape} does not match env")
    return initial


def _population_search(env, s0, params, rng, grad_steps, initial=None, on_iteration=None):
    G, K = params.G, params.K
    pop = sample_action_sequences(_initial(env, initial), G, rng.substream("sample", 0))
    trace = np.empty((params.T, 2))
    for t in range(params.T):
        for _ in range(grad_steps):
            pop = _ascend(env, s0, pop, params)
        returns = _evaluate(env, s0, pop)
        order = sort_indices_by_return(returns)
        dist = fit_elites(pop, returns, K)
        trace[t] = returns[order[0]], returns.mean()
        if on_iteration is not None:
            on_iteration(t, pop, returns, order)
        if t == params.T - 1:
            # the evaluated population is final; fresh draws would go unscored
            best = order[0]
            return PlanOutcome(pop[best].copy(), float(returns[best]), trace, dist)
        sub = rng.substream("sample", t + 1)
        if params.retain_elites:
            fresh = sample_action_sequences(dist, G - K, sub) if G > K else pop[:0]
            pop = np.concatenate([pop[order[:K]], fresh])
        else:
            pop = sample_action_sequences(dist, G, sub)


def cem_plan(env: EnvSpec, s0: PointMassState, params: PlannerParams, rng: RngStream,
             initial: GaussianPlanDistribution | None = None,
             on_iteration: IterationHook | None = None) -> PlanOutcome:
    """Cross-entropy method: sample, score, refit to the top ``K``.

    With ``params.retain_elites`` (default) the top ``K`` sequences survive into
    the next population and only ``G - K`` are redrawn, mirroring Grad+CEM.
    """
    return _population_search(env, s0, params, rng, 0, initial, on_iteration)


def gradcem_plan(env: EnvSpec, s0: PointMassState, params: PlannerParams, rng: RngStream,
                 initial: GaussianPlanDistribution | None = None,
                 on_iteration: IterationHook | None = None) -> PlanOutcome:
    """CEM where every population member first takes ``J`` gradient-ascent steps
    on its return before being scored and ranked."""
    return _population_search(env, s0, params, rng, params.J, initial, on_iteration)


def grad_plan(env: EnvSpec, s0: PointMassState, params: PlannerParams, rng: RngStream,
              initial: GaussianPlanDistribution | None = None,
              on_iteration: IterationHook | None = None) -> PlanOutcome:
    """Independent gradient ascent from ``G`` random starts, ``T`` steps each."""
    pop = sample_action_sequences(_initial(env, initial), params.G, rng.substream("sample", 0))
    trace = np.empty((params.T, 2))
    for t in range(params.T):
        pop = _ascend(env, s0, pop, params)
        returns = _evaluate(env, s0, pop)
        order = sort_indices_by_return(returns)
        trace[t] = returns[order[0]], returns.mean()
        if on_iteration is not None:
            on_iteration(t, pop, returns, order)
    best = order[0]
    return PlanOutcome(pop[best].copy(), float(returns[best]), trace, None)


PLANNERS = {
    "cem": cem_plan,
    "grad": grad_plan,
    "gradcem": gradcem_plan,
}


def get_planner(name: str):
    try:
        return PLANNERS[name]
    except KeyError:
        raise ParameterError(f"unknown planner {name!r}; choose from {sorted(PLANNERS)}") from None
