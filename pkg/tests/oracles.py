"""Independent reference solutions used by the tests.

Nothing here calls the package's kernels: the optimal-control oracle works
from the textbook double-integrator matrices.
"""
import numpy as np


def lq_optimal_return(dim, horizon, dt, mass, goal, p0, v0, reward_scale=1.0, effort_cost=0.0):
    """Optimal return of the obstacle-free point mass by backward Riccati recursion.

    Coordinates decouple, so each axis is solved as a 1-D double integrator
    with state ``(p, v, 1)``; the constant lets the goal offset enter a purely
    quadratic cost.  Returns ``(optimal_return, optimal_actions)``.
    """
    q = reward_scale / dim
    r = effort_cost / dim
    A = np.array([[1.0, dt, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    B = np.array([dt * dt / mass, dt / mass, 0.0])
    total = 0.0
    actions = np.zeros((horizon, dim))
    for n in range(dim):
        e = np.array([1.0, 0.0, -goal[n]])
        Qe = q * np.outer(e, e)
        P = np.zeros((3, 3))
        gains = []
        for _ in range(horizon):
            Pt = Qe + P
            denom = r + B @ Pt @ B
            Kg = (B @ Pt @ A) / denom
            gains.append(Kg)
            P = A.T @ Pt @ A - np.outer(A.T @ Pt @ B, B @ Pt @ A) / denom
        gains.reverse()
        z = np.array([p0[n], v0[n], 1.0])
        total -= z @ P @ z
        for h, Kg in enumerate(gains):
            a = -Kg @ z
            actions[h, n] = a
            z = A @ z + B * a
    return total, actions


def lq_least_squares_return(dim, horizon, dt, mass, goal, p0, v0, reward_scale=1.0,
                            effort_cost=0.0):
    """Same optimum as :func:`lq_optimal_return` via one stacked least-squares solve."""
    q = reward_scale / dim
    r = effort_cost / dim
    # p_h = p0 + h dt v0 + sum_{k<h} (h - k) dt^2 / m * a_k  (semi-implicit Euler)
    hs = np.arange(1, horizon + 1)
    M = np.zeros((horizon, horizon))
    for h in range(1, horizon + 1):
        for k in range(h):
            M[h - 1, k] = (h - k) * dt * dt / mass
    total = 0.0
    for n in range(dim):
        free = p0[n] + hs * dt * v0[n]
        lhs = np.vstack([np.sqrt(q) * M, np.sqrt(r) * np.eye(horizon)])
        rhs = np.concatenate([np.sqrt(q) * (goal[n] - free), np.zeros(horizon)])
        a = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        total -= q * np.sum((M @ a + free - goal[n]) ** 2) + r * np.sum(a * a)
    return total
