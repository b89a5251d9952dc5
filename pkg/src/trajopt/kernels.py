"""Batched point-mass rollout and adjoint kernels.

Two implementations share one calling convention:

* numba ``@njit`` loops (default when numba imports cleanly)
* vectorized numpy over the population axis

Set ``TRAJOPT_BACKEND=numpy`` to force the fallback. Within one backend the
forward pass used by :func:`rollout_grad_batch` is the same code as
:func:`rollout_batch`, so returns agree bit for bit.

Array conventions: ``actions`` is ``(G, H, N)``, ``centers`` is ``(M, N)``,
``radii`` is ``(M,)``. All float64.
"""
import os

import numpy as np

_requested = os.environ.get("TRAJOPT_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"TRAJOPT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    from numba import njit
except ImportError:
    njit = None

BACKEND = "numba" if njit is not None else "numpy"


# --------------------------------------------------------------------------
# numpy fallback
# --------------------------------------------------------------------------

def _sqnorm_np(x):
    # sequential over the last axis so every backend sums in the same order
    acc = x[..., 0] * x[..., 0]
    for n in range(1, x.shape[-1]):
        acc = acc + x[..., n] * x[..., n]
    return acc


def _contact_np(p, centers, radii, spring_k):
    force = np.zeros_like(p)
    for i in range(centers.shape[0]):
        u = p - centers[i]
        r = np.sqrt(_sqnorm_np(u))
        d = radii[i] - r
        active = (r > 0.0) & (d > 0.0)
        coef = np.where(active, spring_k * d / np.where(active, r, 1.0), 0.0)
        force = force + coef[:, None] * u
    return force


def _reward_np(p, goal, reward_scale, dim):
    return -reward_scale * _sqnorm_np(p - goal) / dim


def _forward_np(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                reward_scale, effort_cost):
    G, H, N = actions.shape
    pos = np.empty((G, H, N))
    vel = np.empty((G, H, N))
    total = np.zeros(G)
    p = np.broadcast_to(p0, (G, N)).copy()
    v = np.broadcast_to(v0, (G, N)).copy()
    for h in range(H):
        a = actions[:, h, :]
        force = a + _contact_np(p, centers, radii, spring_k)
        v = v + dt * force / mass
        p = p + dt * v
        pos[:, h] = p
        vel[:, h] = v
        r = _reward_np(p, goal, reward_scale, N)
        if effort_cost != 0.0:
            r = r - effort_cost * _sqnorm_np(a) / N
        total = total + r
    return total, pos, vel


def _contact_vjp_np(p, lam, centers, radii, spring_k):
    """Transpose-Jacobian product of the summed contact force."""
    out = np.zeros_like(p)
    for i in range(centers.shape[0]):
        u = p - centers[i]
        r = np.sqrt(_sqnorm_np(u))
        R = radii[i]
        active = (r > 0.0) & (R - r > 0.0)
        rs = np.where(active, r, 1.0)
        ul = np.sum(u * lam, axis=-1)
        diag = spring_k * (R / rs - 1.0)
        rank1 = spring_k * R * ul / rs ** 3
        term = diag[:, None] * lam - rank1[:, None] * u
        out = out + np.where(active[:, None], term, 0.0)
    return out


def _rollout_grad_np(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                     reward_scale, effort_cost):
    total, pos, _ = _forward_np(p0, v0, actions, dt, mass, goal, centers, radii,
                                spring_k, reward_scale, effort_cost)
    G, H, N = actions.shape
    grad = np.empty_like(actions)
    lam_p = np.zeros((G, N))
    lam_v = np.zeros((G, N))
    for h in range(H - 1, -1, -1):
        # state s_{h+1} is pos[:, h]; reward on it
        lam_p = lam_p - 2.0 * reward_scale * (pos[:, h] - goal) / N
        lam_vt = lam_v + dt * lam_p
        g = (dt / mass) * lam_vt
        if effort_cost != 0.0:
            g = g - 2.0 * effort_cost * actions[:, h] / N
        grad[:, h] = g
        p_prev = pos[:, h - 1] if h > 0 else np.broadcast_to(p0, (G, N))
        lam_p = lam_p + (dt / mass) * _contact_vjp_np(p_prev, lam_vt, centers, radii, spring_k)
        lam_v = lam_vt
    return total, grad


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

if njit is not None:

    @njit(cache=True, nogil=True)
    def _forward_one(p0, v0, a, dt, mass, goal, centers, radii, spring_k,
                     reward_scale, effort_cost, pos, vel):
        H, N = a.shape
        M = centers.shape[0]
        p = p0.copy()
        v = v0.copy()
        force = np.empty(N)
        total = 0.0
        for h in range(H):
            for n in range(N):
                force[n] = 0.0
            for i in range(M):
                sq = (p[0] - centers[i, 0]) * (p[0] - centers[i, 0])
                for n in range(1, N):
                    sq = sq + (p[n] - centers[i, n]) * (p[n] - centers[i, n])
                r = np.sqrt(sq)
                d = radii[i] - r
                if r > 0.0 and d > 0.0:
                    coef = spring_k * d / r
                    for n in range(N):
                        force[n] = force[n] + coef * (p[n] - centers[i, n])
            for n in range(N):
                f = a[h, n] + force[n]
                v[n] = v[n] + dt * f / mass
                p[n] = p[n] + dt * v[n]
                pos[h, n] = p[n]
                vel[h, n] = v[n]
            sq = (p[0] - goal[0]) * (p[0] - goal[0])
            for n in range(1, N):
                sq = sq + (p[n] - goal[n]) * (p[n] - goal[n])
            rew = -reward_scale * sq / N
            if effort_cost != 0.0:
                sa = a[h, 0] * a[h, 0]
                for n in range(1, N):
                    sa = sa + a[h, n] * a[h, n]
                rew = rew - effort_cost * sa / N
            total = total + rew
        return total

    @njit(cache=True, nogil=True)
    def _rollout_nb(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                    reward_scale, effort_cost):
        G, H, N = actions.shape
        pos = np.empty((G, H, N))
        vel = np.empty((G, H, N))
        total = np.empty(G)
        for g in range(G):
            total[g] = _forward_one(p0, v0, actions[g], dt, mass, goal, centers,
                                    radii, spring_k, reward_scale, effort_cost,
                                    pos[g], vel[g])
        return total, pos, vel

    @njit(cache=True, nogil=True)
    def _rollout_grad_nb(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                         reward_scale, effort_cost):
        G, H, N = actions.shape
        M = centers.shape[0]
        pos = np.empty((H, N))
        vel = np.empty((H, N))
        total = np.empty(G)
        grad = np.empty((G, H, N))
        lam_p = np.empty(N)
        lam_vt = np.empty(N)
        u = np.empty(N)
        for g in range(G):
            total[g] = _forward_one(p0, v0, actions[g], dt, mass, goal, centers,
                                    radii, spring_k, reward_scale, effort_cost,
                                    pos, vel)
            for n in range(N):
                lam_p[n] = 0.0
                lam_vt[n] = 0.0
            for h in range(H - 1, -1, -1):
                for n in range(N):
                    lam_p[n] = lam_p[n] - 2.0 * reward_scale * (pos[h, n] - goal[n]) / N
                    # lam_vt still holds lam_v of the later state here
                    lam_vt[n] = lam_vt[n] + dt * lam_p[n]
                    gr = (dt / mass) * lam_vt[n]
                    if effort_cost != 0.0:
                        gr = gr - 2.0 * effort_cost * actions[g, h, n] / N
                    grad[g, h, n] = gr
                for i in range(M):
                    sq = 0.0
                    ul = 0.0
                    for n in range(N):
                        if h > 0:
                            u[n] = pos[h - 1, n] - centers[i, n]
                        else:
                            u[n] = p0[n] - centers[i, n]
                        sq += u[n] * u[n]
                        ul += u[n] * lam_vt[n]
                    r = np.sqrt(sq)
                    R = radii[i]
                    if r > 0.0 and R - r > 0.0:
                        diag = spring_k * (R / r - 1.0)
                        rank1 = spring_k * R * ul / (r * r * r)
                        for n in range(N):
                            lam_p[n] = lam_p[n] + (dt / mass) * (diag * lam_vt[n] - rank1 * u[n])
        return total, grad


def _pack(p0, v0, actions, dt, mass, goal, centers, radii, spring_k, reward_scale,
          effort_cost):
    actions = np.ascontiguousarray(actions, dtype=np.float64)
    N = actions.shape[-1]
    return (np.ascontiguousarray(p0, dtype=np.float64),
            np.ascontiguousarray(v0, dtype=np.float64),
            actions, float(dt), float(mass),
            np.ascontiguousarray(goal, dtype=np.float64),
            np.ascontiguousarray(np.asarray(centers, dtype=np.float64).reshape(-1, N)),
            np.ascontiguousarray(radii, dtype=np.float64).reshape(-1),
            float(spring_k), float(reward_scale), float(effort_cost))


def rollout_batch(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                  reward_scale, effort_cost=0.0):
    """Roll out ``G`` action sequences; returns ``(returns, positions, velocities)``."""
    args = _pack(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                 reward_scale, effort_cost)
    if BACKEND == "numba":
        return _rollout_nb(*args)
    return _forward_np(*args)


def rollout_grad_batch(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                       reward_scale, effort_cost=0.0):
    """Returns and d(return)/d(actions) for ``G`` sequences via reverse accumulation."""
    args = _pack(p0, v0, actions, dt, mass, goal, centers, radii, spring_k,
                 reward_scale, effort_cost)
    if BACKEND == "numba":
        return _rollout_grad_nb(*args)
    return _rollout_grad_np(*args)
