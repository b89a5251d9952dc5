"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
"""
from __future__ import annotations

import argparse
import contextlib
import os
import sys

import numpy as np

from . import bench
from .core import InvalidDistributionError, InvalidReturnError, ParameterError, RngStream
from .config import ConfigParseError, parse_config
from .diffenv import gradient_check, reward
from .mpc import run_episode
from .planners import NumericalError, get_planner

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class CheckFailed(RuntimeError):
    pass


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _workers(cfg) -> int:
    threads = cfg["threads"]
    return threads if threads > 0 else (os.cpu_count() or 1)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_plan(cfg, args, out):
    env = cfg.env()
    params = cfg.planner_params()
    outcome = get_planner(cfg["planner.name"])(env, env.origin(), params, RngStream(cfg["seed"]))
    out.write("iteration,best_return,mean_return\n")
    for t, (best, mean) in enumerate(outcome.trace):
        out.write(f"{t + 1},{_fmt(best)},{_fmt(mean)}\n")
    if args.actions:
        with open(args.actions, "w", encoding="utf-8") as fh:
            fh.write("step," + ",".join(f"a{i}" for i in range(env.dim)) + "\n")
            for h, a in enumerate(outcome.best_actions):
                fh.write(f"{h}," + ",".join(_fmt(x) for x in a) + "\n")


def cmd_episode(cfg, args, out):
    env = cfg.env()
    result = run_episode(env, cfg["planner.name"], cfg.planner_params(), env.origin(),
                         cfg["mpc.steps"], RngStream(cfg["seed"]), warm_start=cfg["mpc.warm_start"])
    dims = range(env.dim)
    out.write("step,plan_return,reward," + ",".join(f"x{i}" for i in dims) + ","
              + ",".join(f"a{i}" for i in dims) + "\n")
    for l, (a, s, pr) in enumerate(zip(result.executed_actions, result.visited_states[1:],
                                       result.per_step_plan_returns)):
        cells = [str(l + 1), _fmt(pr), _fmt(reward(s, env))]
        cells += [_fmt(x) for x in s.position] + [_fmt(x) for x in a]
        out.write(",".join(cells) + "\n")


def _sweep(cfg, scenario):
    spec = cfg.sweep_spec(scenario)
    return bench.run_sweep(spec, workers=_workers(cfg))


def _sweep_cmd(scenario):
    def run(cfg, args, out):
        records = _sweep(cfg, scenario)
        bench.write_records(records, out)
        if args.summary:
            bench.write_summary(bench.summarize(records), args.summary)
    return run


def cmd_compare(cfg, args, out):
    if args.records:
        try:
            records = bench.read_records(args.records)
        except OSError as exc:
            raise bench.ConfigurationError(f"cannot read records: {exc}") from exc
    else:
        records = _sweep(cfg, args.scenario)
    bench.write_ttests(bench.compare(records, args.a, args.b), out)


def cmd_dump_traj(cfg, args, out):
    bench.dump_trajectories(cfg.env(), cfg["bench.planners"], cfg.planner_params(),
                            cfg["seed"], out)


def cmd_grad_check(cfg, args, out):
    env = cfg.env()
    gen = RngStream(cfg["seed"]).substream("grad-check").generator()
    worst, touching = gradient_check(env, cfg["grad.configs"], gen, h=cfg["grad.h"],
                                     margin=cfg["grad.margin"])
    tol = args.tolerance
    out.write("configs,in_contact,max_rel_error,tolerance,passed\n")
    out.write(f"{cfg['grad.configs']},{touching},{worst:.6e},{tol:g},{str(worst <= tol).lower()}\n")
    if not worst <= tol:
        raise CheckFailed(f"gradient check failed: {worst:.3e} > {tol:g}")


COMMANDS = {
    "plan": (cmd_plan, "plan once from the start state and print the per-iteration trace"),
    "episode": (cmd_episode, "run a receding-horizon episode"),
    "sweep-dim": (_sweep_cmd("dim_sweep"), "dimensionality sweep, one soft obstacle"),
    "sweep-obstacles": (_sweep_cmd("obstacle_sweep"), "obstacle-count sweep, 2-D hard contact"),
    "compare": (cmd_compare, "paired t-tests between two planners per sweep value"),
    "dump-traj": (cmd_dump_traj, "write best-plan positions of each planner"),
    "grad-check": (cmd_grad_check, "adjoint gradient vs central differences"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="base seed (config key 'seed')")
    common.add_argument("--threads", type=int, help="worker processes, 0 = one per CPU")
    common.add_argument("--planner", help="cem, grad or gradcem (planner.name)")
    common.add_argument("-T", type=int, help="iterations (planner.T)")
    common.add_argument("-G", type=int, help="population size (planner.G)")
    common.add_argument("-K", type=int, help="elite count (planner.K)")
    common.add_argument("-J", type=int, help="gradient steps per iteration (planner.J)")
    common.add_argument("--beta", type=float, help="gradient step size (planner.beta)")
    common.add_argument("--out", default=None, help="output CSV path (default stdout)")

    parser = argparse.ArgumentParser(prog="trajopt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "plan":
            p.add_argument("--actions", help="also write the best action sequence here")
        if name in ("sweep-dim", "sweep-obstacles"):
            p.add_argument("--summary", help="also write per-(value, planner) summary CSV here")
        if name == "compare":
            p.add_argument("--a", default="gradcem", help="first planner (default gradcem)")
            p.add_argument("--b", default="cem", help="second planner (default cem)")
            p.add_argument("--records", help="record CSV from a sweep; runs the sweep if omitted")
            p.add_argument("--scenario", default="dim_sweep",
                           choices=("dim_sweep", "obstacle_sweep"))
        if name == "grad-check":
            p.add_argument("--tolerance", type=float, default=1e-5)
    return parser


_FLAG_KEYS = {"seed": "seed", "threads": "threads", "planner": "planner.name",
              "T": "planner.T", "G": "planner.G", "K": "planner.K", "J": "planner.J",
              "beta": "planner.beta"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = list(args.overrides)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            overrides.append((key, value))
    try:
        cfg = parse_config(args.config, overrides)
        run = COMMANDS[args.command][0]
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            with _output(args.out) as out:
                run(cfg, args, out)
    except (ConfigParseError, bench.ConfigurationError, ParameterError) as exc:
        print(f"trajopt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, InvalidReturnError, InvalidDistributionError, FloatingPointError,
            CheckFailed, OSError) as exc:
        print(f"trajopt: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
