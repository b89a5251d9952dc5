"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Both backends live in ``trajopt.kernels`` regardless of ``TRAJOPT_BACKEND``;
this script calls them directly on identical inputs and also reports the
largest disagreement between them.
"""
import argparse
import timeit

import numpy as np

from trajopt import kernels
from trajopt.diffenv import dim_sweep_env, obstacle_sweep_env

CASES = [
    ("dim 2, G=20", dim_sweep_env(2), 20),
    ("dim 20, G=20", dim_sweep_env(20), 20),
    ("5 obstacles, G=20", obstacle_sweep_env(5), 20),
    ("dim 2, G=256", dim_sweep_env(2), 256),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not hasattr(kernels, "_rollout_nb"):
        raise SystemExit("numba backend unavailable (unset TRAJOPT_BACKEND or install numba)")

    print(f"{'case':<20}{'kernel':<10}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max diff':>11}")
    for label, env, G in CASES:
        rng = np.random.default_rng(0)
        actions = rng.standard_normal((G, env.horizon, env.dim))
        s0 = env.origin()
        packed = kernels._pack(s0.position, s0.velocity, actions, *env.kernel_args())
        pairs = [("forward", kernels._forward_np, kernels._rollout_nb),
                 ("adjoint", kernels._rollout_grad_np, kernels._rollout_grad_nb)]
        for name, np_fn, nb_fn in pairs:
            nb_fn(*packed)  # compile / load cache
            diff = max(float(np.max(np.abs(x - y))) for x, y in zip(np_fn(*packed), nb_fn(*packed)))
            t_np = min(timeit.repeat(lambda: np_fn(*packed), number=1, repeat=args.repeat))
            t_nb = min(timeit.repeat(lambda: nb_fn(*packed), number=1, repeat=args.repeat))
            print(f"{label:<20}{name:<10}{t_np * 1e3:>10.3f}{t_nb * 1e3:>10.3f}"
                  f"{t_np / t_nb:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
