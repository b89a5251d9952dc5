"""Shared types plus sampling and elite-refit primitives.

Action sequences are plain ``(H, N)`` float arrays; a population of them is
``(G, H, N)``.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

VAR_FLOOR = 1e-6


class ParameterError(ValueError):
    pass


class InvalidDistributionError(ValueError):
    pass


class InvalidReturnError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianPlanDistribution:
    """Diagonal Gaussian over ``(H, N)`` action sequences."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        var = np.array(self.variance, dtype=np.float64)
        if mean.ndim != 2 or mean.shape != var.shape:
            raise InvalidDistributionError(
                f"mean {mean.shape} and variance {var.shape} must be equal 2-d shapes")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise InvalidDistributionError("non-finite distribution parameters")
        if np.any(var < VAR_FLOOR):
            raise InvalidDistributionError(f"variance below floor {VAR_FLOOR}")
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @classmethod
    def standard(cls, horizon: int, dim: int) -> GaussianPlanDistribution:
        return cls(np.zeros((horizon, dim)), np.ones((horizon, dim)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mean.shape


@dataclass(frozen=True)
class PlannerParams:
    T: int = 10
    G: int = 20
    K: int = 4
    J: int = 1
    beta: float = 0.5
    seed: int = 0
    # step is beta * N: rewards are averaged over N, which shrinks gradients by 1/N
    dim_scaled_beta: bool = True
    # off by default; caps each sequence's gradient at clip_norm
    clip_grad: bool = False
    clip_norm: float = 10.0
    retain_elites: bool = True

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        if not 1 <= self.K <= self.G:
            raise ParameterError(f"need 1 <= K <= G, got K={self.K}, G={self.G}")
        if self.J < 0:
            raise ParameterError(f"J must be >= 0, got {self.J}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if not self.clip_norm > 0:
            raise ParameterError("clip_norm must be > 0")

    def step_size(self, dim: int) -> float:
        return self.beta * dim if self.dim_scaled_beta else self.beta


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ParameterError(f"substream keys must be non-negative, got {part}")
    return part


@dataclass(frozen=True)
class RngStream:
    """Seeded stream from which keyed, independent substreams are derived.

    A substream is fully determined by ``(seed, key)``, so the same key path
    always yields the same draws no matter what else was drawn before or in
    which order parallel workers run.
    """

    seed: int
    key: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFF_FFFF_FFFF_FFFF)
        object.__setattr__(self, "key", tuple(_key_part(k) for k in self.key))

    def substream(self, *key) -> RngStream:
        return RngStream(self.seed, self.key + tuple(_key_part(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def sample_action_sequences(dist: GaussianPlanDistribution, count: int,
                            rng: RngStream) -> np.ndarray:
    """Draw ``count`` sequences; sample ``i`` comes from ``rng.substream(i)``."""
    if not isinstance(dist, GaussianPlanDistribution):
        raise InvalidDistributionError("expected a GaussianPlanDistribution")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    std = np.sqrt(dist.variance)
    out = np.empty((count,) + dist.shape)
    for i in range(count):
        eps = rng.substream(i).generator().standard_normal(dist.shape)
        out[i] = dist.mean + std * eps
    return out


def sort_indices_by_return(returns) -> np.ndarray:
    """Indices by descending return; ties keep their original order."""
    r = np.asarray(returns, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(r)):
        raise InvalidReturnError("returns contain NaN or infinite values")
    return np.argsort(-r, kind="stable")


def fit_elites(sequences, returns, K: int) -> GaussianPlanDistribution:
    seqs = np.asarray(sequences, dtype=np.float64)
    r = np.asarray(returns, dtype=np.float64).reshape(-1)
    if seqs.ndim != 3 or seqs.shape[0] == 0:
        raise ParameterError(f"expected a nonempty (G, H, N) population, got {seqs.shape}")
    if r.shape[0] != seqs.shape[0]:
        raise ParameterError("one return per sequence required")
    if not 1 <= K <= seqs.shape[0]:
        raise ParameterError(f"K={K} outside [1, {seqs.shape[0]}]")
    elites = seqs[sort_indices_by_return(r)[:K]]
    mean = elites.mean(axis=0)
    var = np.maximum(((elites - mean) ** 2).mean(axis=0), VAR_FLOOR)
    return GaussianPlanDistribution(mean, var)


def check_actions(actions, horizon: int, dim: int) -> np.ndarray:
    a = np.asarray(actions, dtype=np.float64)
    if a.shape != (horizon, dim):
        raise ParameterError(f"actions must have shape {(horizon, dim)}, got {a.shape}")
    return a
