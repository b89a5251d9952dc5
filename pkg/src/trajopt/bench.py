"""Seeded planner comparisons on the point-mass environment.

Two sweeps are provided: dimensionality with one soft obstacle, and obstacle
count in 2-D with hard contact.  Every (value, planner, seed) cell is
independent; results are always returned in canonical (value, planner, seed)
order whatever the worker count.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betainc

from .core import ParameterError, PlannerParams, RngStream
from .diffenv import (
    HARD_SPRING_K,
    SOFT_SPRING_K,
    EnvSpec,
    dim_sweep_env,
    obstacle_sweep_env,
    rollout,
)
from .mpc import run_episode
from .planners import PLANNERS, get_planner

SCENARIOS = ("dim_sweep", "obstacle_sweep", "custom")
DEFAULT_DIMS = (2, 5, 10, 15, 20)
DEFAULT_COUNTS = (1, 2, 3, 4, 5)

RECORD_HEADER = ["scenario", "value", "planner", "seed", "total_reward", "wall_time_s"]
SUMMARY_HEADER = ["value", "planner", "mean", "std", "count"]
TTEST_HEADER = ["value", "planner_a", "planner_b", "t", "dof", "p"]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    scenario: str
    sweep_values: tuple[int, ...]
    planners: tuple[str, ...] = ("cem", "grad", "gradcem")
    seeds: tuple[int, ...] = tuple(range(50))
    params: PlannerParams = field(default_factory=PlannerParams)
    # EnvSpec keyword overrides (horizon, dt, mass, reward_scale, effort_cost, ...)
    env_overrides: dict = field(default_factory=dict)
    soft_spring_k: float = SOFT_SPRING_K
    hard_spring_k: float = HARD_SPRING_K
    # "single": one plan from the start state, model return of the best plan
    # "episode": full receding-horizon episode, realized return
    mode: str = "single"
    episode_steps: int = 50
    record_timing: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if not self.sweep_values or not self.planners or not self.seeds:
            raise ConfigurationError("sweep_values, planners and seeds must be nonempty")
        for name in self.planners:
            if name not in PLANNERS:
                raise ConfigurationError(f"unknown planner {name!r}")
        if self.mode not in ("single", "episode"):
            raise ConfigurationError(f"mode must be 'single' or 'episode', got {self.mode!r}")
        if any(int(v) < 1 for v in self.sweep_values):
            raise ConfigurationError("sweep values must be positive integers")
        object.__setattr__(self, "sweep_values", tuple(int(v) for v in self.sweep_values))
        object.__setattr__(self, "planners", tuple(self.planners))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    value: int
    planner: str
    seed: int
    total_reward: float
    wall_time_s: float = 0.0


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float


def build_env(spec: SweepSpec, value: int) -> EnvSpec:
    overrides = dict(spec.env_overrides)
    if spec.scenario == "dim_sweep":
        overrides.pop("dim", None)
        return dim_sweep_env(value, spring_k=spec.soft_spring_k, **overrides)
    if spec.scenario == "obstacle_sweep":
        overrides.pop("dim", None)
        return obstacle_sweep_env(value, spring_k=spec.hard_spring_k, **overrides)
    # custom: the sweep value is the dimension, geometry comes from the overrides
    overrides["dim"] = value
    overrides.setdefault("spring_k", spec.soft_spring_k)
    return EnvSpec(**overrides)


def run_cell(spec: SweepSpec, value: int, planner: str, seed: int) -> RunRecord:
    env = build_env(spec, value)
    params = replace(spec.params, seed=seed)
    rng = RngStream(seed)
    start = time.perf_counter()
    if spec.mode == "single":
        total = get_planner(planner)(env, env.origin(), params, rng).best_return
    else:
        total = run_episode(env, planner, params, env.origin(), spec.episode_steps, rng).realized_return
    elapsed = time.perf_counter() - start if spec.record_timing else 0.0
    return RunRecord(spec.scenario, value, planner, seed, float(total), elapsed)


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[RunRecord]:
    cells = [(spec, v, p, s) for v in spec.sweep_values for p in spec.planners for s in spec.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_args, cells, chunksize=8))
    else:
        records = [run_cell(*c) for c in cells]
    return sorted(records, key=lambda r: (r.value, r.planner, r.seed))


def run_dim_sweep(spec: SweepSpec, workers: int = 1) -> list[RunRecord]:
    if spec.scenario != "dim_sweep":
        raise ConfigurationError(f"expected a dim_sweep spec, got {spec.scenario!r}")
    return run_sweep(spec, workers)


def run_obstacle_sweep(spec: SweepSpec, workers: int = 1) -> list[RunRecord]:
    if spec.scenario != "obstacle_sweep":
        raise ConfigurationError(f"expected an obstacle_sweep spec, got {spec.scenario!r}")
    return run_sweep(spec, workers)


def summarize(records) -> dict[tuple[int, str], SummaryStats]:
    """Mean and population standard deviation of total reward per (value, planner)."""
    groups: dict[tuple[int, str], list[float]] = {}
    for r in records:
        groups.setdefault((r.value, r.planner), []).append(r.total_reward)
    out = {}
    for key in sorted(groups):
        x = np.sort(np.asarray(groups[key]))  # sorted so record order cannot matter
        out[key] = SummaryStats(float(x.mean()), float(x.std()), len(x))
    return out


def t_two_sided_p(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(min(1.0, max(0.0, betainc(dof / 2.0, 0.5, dof / (dof + t * t)))))


def paired_t_test(a, b) -> TTestResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("paired samples must be 1-d and of equal length")
    n = a.shape[0]
    if n < 2:
        raise ParameterError(f"need at least 2 pairs, got {n}")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, n - 1, 1.0)
        t = math.copysign(math.inf, mean)
    else:
        t = float(mean * math.sqrt(n) / sd)
    return TTestResult(t, n - 1, t_two_sided_p(t, n - 1))


def compare(records, planner_a: str, planner_b: str) -> list[tuple[int, str, str, TTestResult]]:
    """Paired t-test of ``planner_a`` against ``planner_b`` at each sweep value."""
    by_key = {(r.value, r.planner, r.seed): r.total_reward for r in records}
    present = {r.planner for r in records}
    missing = [p for p in (planner_a, planner_b) if p not in present]
    if missing:
        raise ConfigurationError(f"no records for planner(s): {', '.join(missing)}")
    values = sorted({r.value for r in records})
    rows = []
    for v in values:
        seeds = sorted(s for (val, p, s) in by_key if val == v and p == planner_a
                       and (v, planner_b, s) in by_key)
        if len(seeds) < 2:
            continue
        a = [by_key[(v, planner_a, s)] for s in seeds]
        b = [by_key[(v, planner_b, s)] for s in seeds]
        rows.append((v, planner_a, planner_b, paired_t_test(a, b)))
    return rows


def best_plan_positions(env: EnvSpec, planner: str, params: PlannerParams, seed: int) -> np.ndarray:
    s0 = env.origin()
    outcome = get_planner(planner)(env, s0, replace(params, seed=seed), RngStream(seed))
    return np.vstack([s0.position[None], rollout(env, s0, outcome.best_actions).positions])


def dump_trajectories(env: EnvSpec, planners, params: PlannerParams, seed: int, out) -> int:
    """Write each planner's best-plan positions (start included) as CSV rows.

    ``out`` is a path or a text stream.  Returns the number of data rows.
    """
    header = ["planner", "step"] + [f"x{i}" for i in range(env.dim)]
    rows = []
    for name in planners:
        for h, p in enumerate(best_plan_positions(env, name, params, seed)):
            rows.append([name, h] + [_fmt(x) for x in p])
    _write_csv(out, header, rows)
    return len(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(out, header, rows):
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                _write_csv(fh, header, rows)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc}") from exc
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def write_records(records, out):
    _write_csv(out, RECORD_HEADER, [
        [r.scenario, r.value, r.planner, r.seed, _fmt(r.total_reward), f"{r.wall_time_s:.6f}"]
        for r in records])


def read_records(source) -> list[RunRecord]:
    if isinstance(source, str) and "\n" in source:
        fh = io.StringIO(source)
    elif hasattr(source, "read"):
        fh = source
    else:
        with open(source, encoding="utf-8", newline="") as f:
            return read_records(f)
    reader = csv.DictReader(fh)
    if reader.fieldnames != RECORD_HEADER:
        raise ConfigurationError(f"record CSV header must be {','.join(RECORD_HEADER)}")
    return [RunRecord(row["scenario"], int(row["value"]), row["planner"], int(row["seed"]),
                      float(row["total_reward"]), float(row["wall_time_s"])) for row in reader]


def write_summary(summary: dict, out):
    _write_csv(out, SUMMARY_HEADER, [
        [v, p, _fmt(s.mean), _fmt(s.std), s.count] for (v, p), s in sorted(summary.items())])


def write_ttests(rows, out):
    _write_csv(out, TTEST_HEADER, [
        [v, a, b, _fmt(r.t_statistic), r.degrees_of_freedom, _fmt(r.p_value)]
        for v, a, b, r in rows])
