"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, keys are dotted
(``planner.beta``).  Unknown keys are rejected.  Precedence, lowest first:
built-in defaults, the config file, command-line overrides.  ``seed`` falls
back to the ``TRAJOPT_SEED`` environment variable when neither file nor
command line sets it.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .bench import DEFAULT_COUNTS, DEFAULT_DIMS, ConfigurationError, SweepSpec
from .core import ParameterError, PlannerParams
from .diffenv import EnvSpec, dim_sweep_env, obstacle_sweep_env


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    "threads": (int, 0),
    "env.dim": (int, 2),
    "env.horizon": (int, 30),
    "env.dt": (float, 0.05),
    "env.mass": (float, 1.0),
    "env.goal": (_float_list, ()),
    "env.reward_scale": (float, 1.0),
    "env.effort_cost": (float, 0.0),
    "env.spring_k": (float, 10.0),
    "env.hard_spring_k": (float, 100.0),
    # single: one soft sphere halfway to the goal; corridor: env.obstacles hard
    # spheres on the start-goal segment (2-D); none: free space
    "env.layout": (str, "single"),
    "env.obstacles": (int, 1),
    "planner.name": (str, "gradcem"),
    "planner.T": (int, 10),
    "planner.G": (int, 20),
    "planner.K": (int, 4),
    "planner.J": (int, 1),
    "planner.beta": (float, 0.5),
    "planner.dim_scaled_beta": (_bool, True),
    "planner.clip_grad": (_bool, False),
    "planner.clip_norm": (float, 10.0),
    "planner.retain_elites": (_bool, True),
    "mpc.steps": (int, 50),
    "mpc.warm_start": (_bool, False),
    "bench.seeds": (int, 50),
    "bench.dim_values": (_int_list, DEFAULT_DIMS),
    "bench.obstacle_values": (_int_list, DEFAULT_COUNTS),
    "bench.planners": (_name_list, ("cem", "grad", "gradcem")),
    "bench.mode": (str, "single"),
    "bench.record_timing": (_bool, False),
    "grad.h": (float, 1e-5),
    "grad.configs": (int, 100),
    "grad.margin": (float, 10.0),
}


class ConfigParseError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def planner_params(self) -> PlannerParams:
        v = self.values
        return PlannerParams(T=v["planner.T"], G=v["planner.G"], K=v["planner.K"],
                             J=v["planner.J"], beta=v["planner.beta"], seed=v["seed"],
                             dim_scaled_beta=v["planner.dim_scaled_beta"],
                             clip_grad=v["planner.clip_grad"], clip_norm=v["planner.clip_norm"],
                             retain_elites=v["planner.retain_elites"])

    def env_overrides(self) -> dict:
        v = self.values
        return dict(horizon=v["env.horizon"], dt=v["env.dt"], mass=v["env.mass"],
                    reward_scale=v["env.reward_scale"], effort_cost=v["env.effort_cost"],
                    goal=np.array(v["env.goal"]) if v["env.goal"] else None)

    def env(self) -> EnvSpec:
        v = self.values
        layout = v["env.layout"]
        kw = self.env_overrides()
        if layout == "single":
            return dim_sweep_env(v["env.dim"], spring_k=v["env.spring_k"], **kw)
        if layout == "corridor":
            if v["env.dim"] != 2:
                raise ParameterError("corridor layout is 2-D; set env.dim = 2")
            return obstacle_sweep_env(v["env.obstacles"], spring_k=v["env.hard_spring_k"], **kw)
        if layout == "none":
            return EnvSpec(dim=v["env.dim"], spring_k=v["env.spring_k"], **kw)
        raise ConfigurationError(f"env.layout must be single, corridor or none, got {layout!r}")

    def sweep_spec(self, scenario: str) -> SweepSpec:
        v = self.values
        values = v["bench.dim_values"] if scenario == "dim_sweep" else v["bench.obstacle_values"]
        overrides = self.env_overrides()
        if overrides["goal"] is None:
            del overrides["goal"]
        return SweepSpec(
            scenario=scenario, sweep_values=values, planners=v["bench.planners"],
            seeds=tuple(v["seed"] + i for i in range(v["bench.seeds"])),
            params=self.planner_params(), env_overrides=overrides,
            soft_spring_k=v["env.spring_k"], hard_spring_k=v["env.hard_spring_k"],
            mode=v["bench.mode"], episode_steps=v["mpc.steps"],
            record_timing=v["bench.record_timing"])


def _read_file(path) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None,
                                       strict=True)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed config {path}: {exc}") from exc
    if parser.sections() != ["run"]:
        raise ConfigParseError(f"malformed config {path}: section headers are not allowed")
    return dict(parser["run"])


def _split_override(item: str) -> tuple[str, str]:
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigParseError(f"override must look like key=value, got {item!r}")
    return key.strip(), value.strip()


def parse_config(path=None, overrides=()) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``overrides`` is an iterable of ``"key=value"`` strings or ``(key, value)``
    pairs and wins over the file.
    """
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(_read_file(path))
    for item in overrides:
        key, value = _split_override(item) if isinstance(item, str) else item
        raw[key] = str(value)
    if "seed" not in raw and os.environ.get("TRAJOPT_SEED", "").strip():
        raw["seed"] = os.environ["TRAJOPT_SEED"].strip()

    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for key, text in raw.items():
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(text)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {text!r} ({exc})") from None
    if values["seed"] < 0:
        raise ConfigurationError("seed must be non-negative")
    if values["bench.seeds"] < 1 or values["mpc.steps"] < 1 or values["grad.configs"] < 1:
        raise ConfigurationError("bench.seeds, mpc.steps and grad.configs must be >= 1")
    if values["threads"] < 0:
        raise ConfigurationError("threads must be >= 0")

    cfg = RunConfig(values)
    # embedded invariants are enforced at load time
    cfg.planner_params()
    cfg.env()
    cfg.sweep_spec("dim_sweep")
    return cfg
