"""Differentiable N-dimensional point mass with spherical spring-contact obstacles.

Dynamics (semi-implicit Euler)::

    F  = a + sum_i k * max(0, r_i - |p - c_i|) * (p - c_i) / |p - c_i|
    v' = v + dt * F / m
    p' = p + dt * v'

Reward on each visited state is ``-reward_scale * |p - goal|^2 / N``.  An
optional effort term ``-effort_cost * |a|^2 / N`` per step is off by default.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .core import ParameterError, check_actions

SOFT_SPRING_K = 10.0
HARD_SPRING_K = 100.0


@dataclass(frozen=True, eq=False)
class PointMassState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=np.float64).reshape(-1)
        v = np.array(self.velocity, dtype=np.float64).reshape(-1)
        if p.shape != v.shape:
            raise ParameterError("position and velocity lengths differ")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ParameterError("non-finite state")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def at_rest(cls, position) -> PointMassState:
        p = np.asarray(position, dtype=np.float64)
        return cls(p, np.zeros_like(p))


@dataclass(frozen=True, eq=False)
class Obstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=np.float64).reshape(-1))
        if not self.radius > 0:
            raise ParameterError(f"obstacle radius must be > 0, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))


def default_goal(dim: int, coordinate: float = np.sqrt(2.0)) -> np.ndarray:
    """Same offset on every axis; Euclidean norm 2 in the plane.

    A fixed per-axis offset keeps the N-averaged reward on one scale across
    dimensions.
    """
    return np.full(dim, float(coordinate))


@dataclass(frozen=True, eq=False)
class EnvSpec:
    dim: int
    horizon: int = 30
    dt: float = 0.05
    mass: float = 1.0
    goal: np.ndarray | None = None
    obstacles: tuple[Obstacle, ...] = field(default=())
    spring_k: float = SOFT_SPRING_K
    reward_scale: float = 1.0
    effort_cost: float = 0.0

    def __post_init__(self):
        if self.dim < 1 or self.horizon < 1:
            raise ParameterError("dim and horizon must be positive")
        if not (self.dt > 0 and self.mass > 0):
            raise ParameterError("dt and mass must be positive")
        if self.spring_k < 0 or self.reward_scale < 0 or self.effort_cost < 0:
            raise ParameterError("spring_k, reward_scale and effort_cost must be >= 0")
        goal = default_goal(self.dim) if self.goal is None else self.goal
        goal = np.array(goal, dtype=np.float64).reshape(-1)
        if goal.shape != (self.dim,):
            raise ParameterError(f"goal must have length {self.dim}")
        object.__setattr__(self, "goal", goal)
        obstacles = tuple(self.obstacles)
        for ob in obstacles:
            if ob.center.shape != (self.dim,):
                raise ParameterError(f"obstacle center must have length {self.dim}")
        object.__setattr__(self, "obstacles", obstacles)

    def replace(self, **changes) -> EnvSpec:
        return replace(self, **changes)

    @property
    def centers(self) -> np.ndarray:
        return np.array([ob.center for ob in self.obstacles]).reshape(-1, self.dim)

    @property
    def radii(self) -> np.ndarray:
        return np.array([ob.radius for ob in self.obstacles], dtype=np.float64)

    def kernel_args(self) -> tuple:
        return (self.dt, self.mass, self.goal, self.centers, self.radii,
                self.spring_k, self.reward_scale, self.effort_cost)

    def origin(self) -> PointMassState:
        return PointMassState.at_rest(np.zeros(self.dim))


def dim_sweep_env(dim: int, spring_k: float = SOFT_SPRING_K, **overrides) -> EnvSpec:
    """Start at the origin, one hypersphere of radius 0.5 halfway to the goal."""
    goal = overrides.pop("goal", None)
    goal = default_goal(dim) if goal is None else np.asarray(goal, dtype=np.float64)
    obstacles = (Obstacle(goal / 2.0, 0.5),)
    return EnvSpec(dim=dim, goal=goal, obstacles=obstacles, spring_k=spring_k, **overrides)


def obstacle_sweep_env(count: int, spring_k: float = HARD_SPRING_K, **overrides) -> EnvSpec:
    """2-D corridor with ``count`` obstacles evenly spaced on the start-goal segment.

    Radii shrink as ``0.5 / sqrt(count)`` so more obstacles fit the same space.
    """
    if count < 1:
        raise ParameterError("obstacle count must be >= 1")
    goal = overrides.pop("goal", None)
    goal = default_goal(2) if goal is None else np.asarray(goal, dtype=np.float64)
    radius = 0.5 / np.sqrt(count)
    obstacles = tuple(Obstacle(goal * (i + 1) / (count + 1), radius) for i in range(count))
    return EnvSpec(dim=2, goal=goal, obstacles=obstacles, spring_k=spring_k, **overrides)


@dataclass(frozen=True, eq=False)
class RolloutResult:
    states: list
    total_return: float
    rewards: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.states])


def contact_force(position, obstacle: Obstacle, spring_k: float) -> np.ndarray:
    p = np.asarray(position, dtype=np.float64)
    if p.shape != obstacle.center.shape:
        raise ParameterError("position and obstacle center lengths differ")
    u = p - obstacle.center
    r = np.sqrt(kernels._sqnorm_np(u))
    d = obstacle.radius - r
    if r > 0.0 and d > 0.0:
        return (spring_k * d / r) * u
    return np.zeros_like(p)


def _check_state(state: PointMassState, env: EnvSpec):
    if state.position.shape != (env.dim,):
        raise ParameterError(f"state dimension {state.position.shape[0]} != env dim {env.dim}")


def step(state: PointMassState, action, env: EnvSpec) -> PointMassState:
    _check_state(state, env)
    a = np.asarray(action, dtype=np.float64).reshape(1, 1, -1)
    if a.shape[-1] != env.dim:
        raise ParameterError(f"action must have length {env.dim}")
    _, pos, vel = kernels.rollout_batch(state.position, state.velocity, a, *env.kernel_args())
    return PointMassState(pos[0, 0], vel[0, 0])


def reward(state: PointMassState, env: EnvSpec) -> float:
    _check_state(state, env)
    return float(kernels._reward_np(state.position[None], env.goal, env.reward_scale, env.dim)[0])


def effort_penalty(action, env: EnvSpec) -> float:
    a = np.asarray(action, dtype=np.float64)
    if env.effort_cost == 0.0:
        return 0.0
    return float(env.effort_cost * kernels._sqnorm_np(a[None])[0] / env.dim)


def evaluate(env: EnvSpec, s0: PointMassState, population) -> np.ndarray:
    """Returns of a ``(G, H, N)`` population."""
    pop = np.asarray(population, dtype=np.float64)
    if pop.ndim != 3 or pop.shape[1:] != (env.horizon, env.dim):
        raise ParameterError(f"population must be (G, {env.horizon}, {env.dim}), got {pop.shape}")
    _check_state(s0, env)
    total, _, _ = kernels.rollout_batch(s0.position, s0.velocity, pop, *env.kernel_args())
    return total


def evaluate_with_grad(env: EnvSpec, s0: PointMassState, population):
    pop = np.asarray(population, dtype=np.float64)
    if pop.ndim != 3 or pop.shape[1:] != (env.horizon, env.dim):
        raise ParameterError(f"population must be (G, {env.horizon}, {env.dim}), got {pop.shape}")
    _check_state(s0, env)
    return kernels.rollout_grad_batch(s0.position, s0.velocity, pop, *env.kernel_args())


def rollout(env: EnvSpec, s0: PointMassState, actions) -> RolloutResult:
    a = check_actions(actions, env.horizon, env.dim)
    _check_state(s0, env)
    total, pos, vel = kernels.rollout_batch(s0.position, s0.velocity, a[None], *env.kernel_args())
    states = [PointMassState(pos[0, h], vel[0, h]) for h in range(env.horizon)]
    rewards = np.array([reward(s, env) - effort_penalty(a[h], env) for h, s in enumerate(states)])
    return RolloutResult(states, float(total[0]), rewards)


def rollout_with_grad(env: EnvSpec, s0: PointMassState, actions) -> tuple[float, np.ndarray]:
    a = check_actions(actions, env.horizon, env.dim)
    total, grad = evaluate_with_grad(env, s0, a[None])
    return float(total[0]), grad[0]


def finite_diff_grad(env: EnvSpec, s0: PointMassState, actions, h: float = 1e-5) -> np.ndarray:
    """Central differences of the rollout return, one entry per action component."""
    if not h > 0:
        raise ParameterError("finite-difference step must be > 0")
    a = check_actions(actions, env.horizon, env.dim)
    n = a.size
    bumps = np.eye(n).reshape(n, env.horizon, env.dim) * h
    plus = evaluate(env, s0, a[None] + bumps)
    minus = evaluate(env, s0, a[None] - bumps)
    return ((plus - minus) / (2.0 * h)).reshape(env.horizon, env.dim)


def min_boundary_gap(env: EnvSpec, s0: PointMassState, actions) -> float:
    """Smallest | |p - c| - r | over all visited positions (s0 included) and obstacles."""
    if not env.obstacles:
        return np.inf
    pos = np.vstack([s0.position[None], rollout(env, s0, actions).positions])
    dist = np.linalg.norm(pos[:, None, :] - env.centers[None], axis=-1)
    return float(np.min(np.abs(dist - env.radii[None])))


def grad_relative_error(analytic, numeric) -> float:
    """Max-norm error of ``analytic`` relative to the max-norm of ``numeric``."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


def random_check_case(env: EnvSpec, gen: np.random.Generator, action_scale: float = 1.0):
    """A random start near the obstacles (or the origin) plus random actions."""
    if env.obstacles:
        anchor = env.obstacles[gen.integers(len(env.obstacles))].center
    else:
        anchor = np.zeros(env.dim)
    s0 = PointMassState(anchor + 0.5 * gen.standard_normal(env.dim), gen.standard_normal(env.dim))
    actions = action_scale * gen.standard_normal((env.horizon, env.dim))
    return s0, actions


def gradient_check(env: EnvSpec, cases: int, gen: np.random.Generator, h: float = 1e-5,
                   margin: float = 10.0, max_tries: int = 100_000) -> tuple[float, int]:
    """Worst adjoint-vs-central-difference error over ``cases`` random configurations.

    Configurations whose trajectory passes within ``margin * h`` of an obstacle
    surface are redrawn; returns ``(max_relative_error, n_in_contact)``.
    """
    worst, accepted, touching = 0.0, 0, 0
    for _ in range(max_tries):
        if accepted == cases:
            break
        s0, actions = random_check_case(env, gen)
        if min_boundary_gap(env, s0, actions) < margin * h:
            continue
        _, g = rollout_with_grad(env, s0, actions)
        fd = finite_diff_grad(env, s0, actions, h)
        worst = max(worst, grad_relative_error(g, fd))
        accepted += 1
        pos = rollout(env, s0, actions).positions
        if env.obstacles:
            dist = np.linalg.norm(pos[:, None, :] - env.centers[None], axis=-1)
            touching += bool(np.any(dist < env.radii[None]))
    if accepted < cases:
        raise ParameterError("could not draw enough configurations away from contact boundaries")
    return worst, touching
