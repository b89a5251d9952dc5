import numpy as np
import pytest

from trajopt.core import (
    GaussianPlanDistribution,
    ParameterError,
    PlannerParams,
    RngStream,
    fit_elites,
    sample_action_sequences,
)
from trajopt.diffenv import EnvSpec, dim_sweep_env, evaluate, obstacle_sweep_env, rollout, rollout_with_grad
from trajopt.planners import (
    NumericalError,
    _clip,
    cem_plan,
    get_planner,
    grad_plan,
    gradcem_plan,
    sgd_ascent_step,
)

ENV = dim_sweep_env(3)
S0 = ENV.origin()


def test_sgd_step_examples():
    a = np.array([[1.0]])
    assert np.array_equal(sgd_ascent_step(a, np.zeros((1, 1)), 0.3), a)
    assert np.array_equal(sgd_ascent_step(a, np.array([[2.0]]), 0.5), [[2.0]])
    g = np.random.default_rng(0).standard_normal((4, 2))
    twice = sgd_ascent_step(sgd_ascent_step(a * 0 + g, g, 0.25), g, 0.25)
    once = sgd_ascent_step(a * 0 + g, g, 0.5)
    np.testing.assert_allclose(twice, once, rtol=1e-15)
    with pytest.raises(ParameterError):
        sgd_ascent_step(a, np.zeros((2, 1)), 0.1)
    with pytest.raises(ParameterError):
        sgd_ascent_step(a, a, -1.0)


def test_cem_single_iteration_refit():
    params = PlannerParams(T=1, G=12, K=12)
    rng = RngStream(4)
    out = cem_plan(ENV, S0, params, rng)
    first = sample_action_sequences(GaussianPlanDistribution.standard(ENV.horizon, 3), 12,
                                    rng.substream("sample", 0))
    expected = fit_elites(first, evaluate(ENV, S0, first), 12)
    np.testing.assert_array_equal(out.distribution.mean, expected.mean)
    np.testing.assert_array_equal(out.distribution.variance, expected.variance)


@pytest.mark.parametrize("plan", [cem_plan, grad_plan, gradcem_plan])
def test_deterministic(plan):
    params = PlannerParams(T=4)
    a = plan(ENV, S0, params, RngStream(9))
    b = plan(ENV, S0, params, RngStream(9))
    assert np.array_equal(a.best_actions, b.best_actions)
    assert np.array_equal(a.trace, b.trace)
    assert a.best_return == b.best_return


@pytest.mark.parametrize("plan", [cem_plan, grad_plan, gradcem_plan])
def test_best_return_recomputes(plan):
    out = plan(ENV, S0, PlannerParams(T=3), RngStream(1))
    assert out.trace.shape == (3, 2)
    assert rollout(ENV, S0, out.best_actions).total_return == out.best_return
    assert out.trace[-1, 0] == out.best_return


@pytest.mark.parametrize("seed", range(5))
def test_j0_reduces_to_cem(seed):
    env = obstacle_sweep_env(2)
    a = gradcem_plan(env, env.origin(), PlannerParams(J=0), RngStream(seed))
    b = cem_plan(env, env.origin(), PlannerParams(J=0), RngStream(seed))
    assert np.array_equal(a.trace, b.trace)
    assert np.array_equal(a.best_actions, b.best_actions)


def test_vanishing_beta_tracks_cem():
    a = gradcem_plan(ENV, S0, PlannerParams(beta=1e-12, dim_scaled_beta=False), RngStream(3))
    b = cem_plan(ENV, S0, PlannerParams(), RngStream(3))
    np.testing.assert_allclose(a.trace, b.trace, rtol=0, atol=1e-6)


def test_grad_vanishing_beta_keeps_best_initial():
    params = PlannerParams(T=3, G=8, beta=1e-14, dim_scaled_beta=False)
    rng = RngStream(2)
    out = grad_plan(ENV, S0, params, rng)
    first = sample_action_sequences(GaussianPlanDistribution.standard(ENV.horizon, 3), 8,
                                    rng.substream("sample", 0))
    assert out.best_return == pytest.approx(evaluate(ENV, S0, first).max(), abs=1e-9)


class Recorder:
    def __init__(self):
        self.log = []

    def __call__(self, t, pop, returns, order):
        self.log.append((t, pop.copy(), returns.copy(), order.copy()))


@pytest.mark.parametrize("plan", [cem_plan, gradcem_plan])
def test_elite_retention_and_population_size(plan):
    params = PlannerParams(T=6, G=10, K=3)
    rec = Recorder()
    plan(ENV, S0, params, RngStream(5), on_iteration=rec)
    assert len(rec.log) == params.T
    for (t, pop, returns, order), (_, nxt, nxt_returns, _) in zip(rec.log, rec.log[1:]):
        assert pop.shape[0] == params.G and nxt.shape[0] == params.G
        elites = order[:params.K]
        # sorted elites dominate every replaced member
        assert returns[elites].min() >= returns[order[params.K:]].max()
        if plan is cem_plan:
            # no gradient phase: survivors reappear unchanged at the front
            assert np.array_equal(nxt[:params.K], pop[elites])
            assert np.array_equal(nxt_returns[:params.K], returns[elites])
    assert rec.log[-1][1].shape[0] == params.G


def test_gradcem_elites_are_previous_top_k_after_update():
    params = PlannerParams(T=3, G=8, K=2, J=1)
    rec = Recorder()
    gradcem_plan(ENV, S0, params, RngStream(8), on_iteration=rec)
    step = params.step_size(ENV.dim)
    for (_, pop, _, order), (_, nxt, _, _) in zip(rec.log, rec.log[1:]):
        for i, idx in enumerate(order[:params.K]):
            _, g = rollout_with_grad(ENV, S0, pop[idx])
            np.testing.assert_array_equal(nxt[i], pop[idx] + step * g)


def test_non_retaining_cem_resamples_everything():
    params = PlannerParams(T=3, G=6, K=2, retain_elites=False)
    rec = Recorder()
    cem_plan(ENV, S0, params, RngStream(0), on_iteration=rec)
    first_pop, second_pop = rec.log[0][1], rec.log[1][1]
    assert second_pop.shape[0] == 6
    assert not any(np.array_equal(second_pop[i], first_pop[j]) for i in range(6) for j in range(6))


def test_grad_ascent_monotone_below_stability_threshold():
    env = EnvSpec(dim=1)
    s0 = env.origin()
    # Hessian of the (quadratic) return by finite differences of the gradient
    H = env.horizon
    base = rollout_with_grad(env, s0, np.zeros((H, 1)))[1].ravel()
    hess = np.array([rollout_with_grad(env, s0, np.eye(H)[k][:, None])[1].ravel() - base
                     for k in range(H)])
    curvature = np.linalg.eigvalsh(-(hess + hess.T) / 2).max()
    threshold = 2.0 / curvature
    params = PlannerParams(T=25, G=1, K=1, beta=0.9 * threshold, dim_scaled_beta=False)
    out = grad_plan(env, s0, params, RngStream(6))
    assert np.all(np.diff(out.trace[:, 0]) >= -1e-12)
    # past the threshold the top mode diverges
    unstable = PlannerParams(T=25, G=1, K=1, beta=1.5 * threshold, dim_scaled_beta=False)
    bad = grad_plan(env, s0, unstable, RngStream(6))
    assert bad.trace[-1, 0] < bad.trace[0, 0]


def test_gradient_clipping():
    g = np.zeros((3, 2, 2))
    g[0] = 100.0
    g[1] = 0.1
    clipped = _clip(g, 10.0)
    assert np.linalg.norm(clipped[0]) == pytest.approx(10.0)
    assert np.array_equal(clipped[1], g[1])
    assert np.array_equal(clipped[2], g[2])
    out = gradcem_plan(ENV, S0, PlannerParams(clip_grad=True, clip_norm=0.01), RngStream(1))
    assert np.isfinite(out.best_return)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    with pytest.raises(NumericalError):
        grad_plan(ENV, S0, PlannerParams(T=40, beta=1e150), RngStream(0))


def test_initial_distribution_shape_checked():
    with pytest.raises(ParameterError):
        cem_plan(ENV, S0, PlannerParams(), RngStream(0),
                 initial=GaussianPlanDistribution.standard(2, 2))


def test_get_planner():
    assert get_planner("gradcem") is gradcem_plan
    with pytest.raises(ParameterError):
        get_planner("mppi")
