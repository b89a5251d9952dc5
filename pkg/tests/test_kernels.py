import numpy as np
import pytest

from trajopt import kernels
from trajopt.diffenv import obstacle_sweep_env


def _args(seed, G=6):
    env = obstacle_sweep_env(3)
    rng = np.random.default_rng(seed)
    p0 = env.obstacles[1].center + 0.2 * rng.standard_normal(2)
    v0 = rng.standard_normal(2)
    actions = 3 * rng.standard_normal((G, env.horizon, 2))
    return (p0, v0, actions) + env.kernel_args()


@pytest.mark.skipif(kernels.BACKEND != "numba", reason="numba backend not active")
@pytest.mark.parametrize("seed", range(4))
def test_numba_matches_numpy(seed):
    args = kernels._pack(*_args(seed))
    nb_total, nb_pos, nb_vel = kernels._rollout_nb(*args)
    np_total, np_pos, np_vel = kernels._forward_np(*args)
    np.testing.assert_allclose(nb_total, np_total, rtol=1e-13)
    np.testing.assert_allclose(nb_pos, np_pos, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(nb_vel, np_vel, rtol=1e-13, atol=1e-15)
    _, nb_grad = kernels._rollout_grad_nb(*args)
    _, np_grad = kernels._rollout_grad_np(*args)
    np.testing.assert_allclose(nb_grad, np_grad, rtol=1e-11, atol=1e-13)


def test_batch_rows_independent_of_batch_size():
    args = _args(7, G=5)
    p0, v0, actions = args[:3]
    full, _, _ = kernels.rollout_batch(p0, v0, actions, *args[3:])
    for g in range(5):
        one, _, _ = kernels.rollout_batch(p0, v0, actions[g:g + 1], *args[3:])
        assert one[0] == full[g]


def test_grad_batch_returns_equal_rollout_batch():
    args = _args(8)
    r1, _, _ = kernels.rollout_batch(*args)
    r2, g = kernels.rollout_grad_batch(*args)
    assert np.array_equal(r1, r2)
    assert g.shape == args[2].shape
