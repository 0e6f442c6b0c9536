"""n-step return targets, advantages, and PopArt normalization statistics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

SCALE_LOW = 1e-2
SCALE_HIGH = 1e6
STATS_STEP = 1e-4


@dataclass(frozen=True)
class TrajectoryUnroll:
    """A contiguous segment of one episode.

    ``observations`` holds one more row than ``actions``/``rewards``; the last
    row is the bootstrap state. When ``terminal`` is set the segment ended the
    episode and the bootstrap value is taken to be zero.
    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    behavior_log_probs: np.ndarray
    task_id: int = 0
    snapshot_version: int = 0
    terminal: bool = False

    def __post_init__(self):
        n = len(self.rewards)
        if len(self.actions) != n or len(self.behavior_log_probs) != n or len(self.observations) != n + 1:
            raise ValueError(
                f"TrajectoryUnroll: inconsistent lengths obs={len(self.observations)} "
                f"actions={len(self.actions)} rewards={n} logp={len(self.behavior_log_probs)}")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("TrajectoryUnroll: non-finite reward")

    def __len__(self):
        return len(self.rewards)


def n_step_returns(rewards, values, gamma: float, terminal: bool = False) -> np.ndarray:
    """G_l = sum_{k>=l} gamma^(k-l) r_k + gamma^(n-l) V(s_n) for every l in the unroll.

    ``values`` has one entry per state including the bootstrap state; only the
    last entry is used. A terminal unroll bootstraps from zero.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n = len(rewards)
    if len(values) != n + 1:
        raise ValueError(f"n_step_returns: expected {n + 1} values, got {len(values)}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"n_step_returns: gamma must be in (0, 1), got {gamma}")
    out = np.empty(n)
    acc = 0.0 if terminal else float(values[-1])
    # backward recurrence G_l = r_l + gamma G_{l+1}, G_n = bootstrap
    for i in range(n - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


@dataclass(frozen=True)
class AdvantageBatch:
    advantages: np.ndarray
    returns: np.ndarray
    values: np.ndarray
    index: np.ndarray


def advantages(returns, values) -> AdvantageBatch:
    """A = G - V. Inputs are plain arrays, so nothing downstream can differentiate through them."""
    g = np.array(returns, dtype=np.float64)
    v = np.array(values, dtype=np.float64)
    if g.shape != v.shape:
        raise ValueError(f"advantages: returns {g.shape} vs values {v.shape}")
    return AdvantageBatch(g - v, g, v, np.arange(len(g)))


@dataclass(frozen=True)
class PopArtStats:
    """Per-channel running first/second moments of return targets."""

    mu: np.ndarray
    nu: np.ndarray
    step_size: float = STATS_STEP
    scale_low: float = SCALE_LOW
    scale_high: float = SCALE_HIGH

    @classmethod
    def create(cls, num_tasks: int = 1, step_size: float = STATS_STEP,
               scale_low: float = SCALE_LOW, scale_high: float = SCALE_HIGH) -> "PopArtStats":
        return cls(np.zeros(num_tasks), np.ones(num_tasks), step_size, scale_low, scale_high)

    @property
    def num_tasks(self) -> int:
        return len(self.mu)

    @property
    def sigma(self) -> np.ndarray:
        var = np.maximum(self.nu - self.mu ** 2, self.scale_low ** 2)
        return np.clip(np.sqrt(var), self.scale_low, self.scale_high)


def popart_update(stats: PopArtStats, targets, task: int) -> PopArtStats:
    """Move channel ``task``'s moments toward the batch moments.

    The step size applies per sample: a batch of N targets moves the moments by
    ``1 - (1 - step)^N`` toward the batch means of G and G^2.
    """
    if not 0.0 < stats.step_size < 1.0:
        raise ValueError("popart_update: step size must be in (0, 1)")
    g = np.asarray(targets, dtype=np.float64).ravel()
    if g.size == 0:
        return stats
    beta = -np.expm1(g.size * np.log1p(-stats.step_size))
    mu, nu = stats.mu.copy(), stats.nu.copy()
    mu[task] += beta * (g.mean() - mu[task])
    nu[task] += beta * ((g * g).mean() - nu[task])
    return replace(stats, mu=mu, nu=nu)


def popart_initialize(stats: PopArtStats, targets, task: int) -> PopArtStats:
    """Set channel ``task``'s moments to the moments of ``targets``."""
    g = np.asarray(targets, dtype=np.float64).ravel()
    if g.size == 0:
        raise ValueError("popart_initialize: no targets")
    mu, nu = stats.mu.copy(), stats.nu.copy()
    mu[task] = g.mean()
    nu[task] = (g * g).mean()
    return replace(stats, mu=mu, nu=nu)


def popart_update_batch(stats: PopArtStats, targets, tasks) -> PopArtStats:
    targets = np.asarray(targets, dtype=np.float64)
    tasks = np.asarray(tasks)
    for t in range(stats.num_tasks):
        sel = tasks == t
        if sel.any():
            stats = popart_update(stats, targets[sel], t)
    return stats


def normalize(stats: PopArtStats, g, task) -> np.ndarray:
    return (np.asarray(g) - stats.mu[task]) / stats.sigma[task]


def denormalize(stats: PopArtStats, v, task) -> np.ndarray:
    return np.asarray(v) * stats.sigma[task] + stats.mu[task]
