"""Trajectory generation from frozen parameter snapshots.

An :class:`ActorPool` steps a set of persistent environments in lockstep,
acting with one snapshot per batch. Unrolls never cross an episode
boundary: an episode ending mid-unroll closes the segment and the
environment restarts into a new segment, so every batch holds exactly
``num_envs * n`` samples. Segments closed by a real termination are marked
terminal; segments cut by a time limit bootstrap from their last state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dists
from .envs import Env
from .network import ParameterSnapshot
from .returns import TrajectoryUnroll


def target_gate(learn_step: int, t_target: int) -> bool:
    """True when the target snapshot should be refreshed at this learn step."""
    if t_target < 1:
        raise ValueError("target_gate: T_target must be >= 1")
    return learn_step % t_target == 0


@dataclass
class RolloutBatch:
    unrolls: list
    snapshot_version: int
    episode_returns: list = field(default_factory=list)

    def __len__(self):
        return sum(len(u) for u in self.unrolls)

    @property
    def observations(self) -> np.ndarray:
        return np.concatenate([u.observations[:-1] for u in self.unrolls])

    @property
    def bootstrap_observations(self) -> np.ndarray:
        return np.stack([u.observations[-1] for u in self.unrolls])

    @property
    def actions(self) -> np.ndarray:
        return np.concatenate([u.actions for u in self.unrolls])

    @property
    def rewards(self) -> np.ndarray:
        return np.concatenate([u.rewards for u in self.unrolls])

    @property
    def behavior_log_probs(self) -> np.ndarray:
        return np.concatenate([u.behavior_log_probs for u in self.unrolls])

    @property
    def tasks(self) -> np.ndarray:
        return np.concatenate([np.full(len(u), u.task_id) for u in self.unrolls])

    @property
    def unroll_tasks(self) -> np.ndarray:
        return np.array([u.task_id for u in self.unrolls])

    @property
    def terminals(self) -> np.ndarray:
        return np.array([u.terminal for u in self.unrolls])


def _policy_step(snapshot: ParameterSnapshot, obs: np.ndarray, rng, mode: bool = False):
    dist, _ = snapshot.forward(obs)
    actions = dist.mode() if mode else dists.sample(dist, rng)
    return actions, dists.log_prob(dist, actions).data


def _to_env_action(env: Env, action):
    spec = env.action_spec
    if spec.discrete:
        return int(action)
    return np.clip(action, spec.low, spec.high)


class ActorPool:
    """Persistent environments plus a private action-sampling generator."""

    def __init__(self, envs: list[Env], seed: int | np.random.SeedSequence):
        self.envs = envs
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        env_seeds, act_seed = ss.spawn(2)
        self.rng = np.random.default_rng(act_seed)
        self.obs = np.stack([env.reset(int(s.generate_state(1)[0]))
                             for env, s in zip(envs, env_seeds.spawn(len(envs)))])
        self.episode_returns = np.zeros(len(envs))
        self.frames = 0

    def generate(self, snapshot: ParameterSnapshot, n: int) -> RolloutBatch:
        if n < 1:
            raise ValueError("generate: unroll length must be >= 1")
        num = len(self.envs)
        seg_obs = [[o] for o in self.obs]
        seg_act = [[] for _ in range(num)]
        seg_rew = [[] for _ in range(num)]
        seg_logp = [[] for _ in range(num)]
        unrolls, finished = [], []

        def close(e, terminal):
            unrolls.append(TrajectoryUnroll(
                observations=np.array(seg_obs[e]), actions=np.array(seg_act[e]),
                rewards=np.array(seg_rew[e]), behavior_log_probs=np.array(seg_logp[e]),
                task_id=self.envs[e].task_id, snapshot_version=snapshot.version,
                terminal=terminal))

        for _ in range(n):
            actions, logp = _policy_step(snapshot, self.obs, self.rng)
            next_obs = np.empty_like(self.obs)
            for e, env in enumerate(self.envs):
                try:
                    o, r, done = env.step(_to_env_action(env, actions[e]))
                except Exception as exc:
                    raise RuntimeError(
                        f"environment {env.name} (slot {e}) failed after {len(seg_act[e])} steps "
                        f"of the current unroll") from exc
                seg_act[e].append(actions[e])
                seg_rew[e].append(r)
                seg_logp[e].append(logp[e])
                self.episode_returns[e] += r
                if done:
                    seg_obs[e].append(o)
                    close(e, not env.truncated)
                    finished.append(float(self.episode_returns[e]))
                    self.episode_returns[e] = 0.0
                    o = env.reset()
                    seg_obs[e], seg_act[e], seg_rew[e], seg_logp[e] = [o], [], [], []
                else:
                    seg_obs[e].append(o)
                next_obs[e] = o
            self.obs = next_obs
        self.frames += num * n
        for e in range(num):
            if seg_act[e]:
                close(e, False)
        return RolloutBatch(unrolls, snapshot.version, finished)

    def get_state(self) -> dict:
        return {
            "rng": self.rng.bit_generator.state,
            "obs": self.obs.tolist(),
            "episode_returns": self.episode_returns.tolist(),
            "frames": self.frames,
            "envs": [env.get_state() for env in self.envs],
        }

    def set_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state["rng"]
        self.obs = np.array(state["obs"], dtype=np.float64)
        self.episode_returns = np.array(state["episode_returns"], dtype=np.float64)
        self.frames = state["frames"]
        for env, s in zip(self.envs, state["envs"]):
            env.set_state(s)


class ParallelActors:
    """Several independent pools, each with its own generator, run on threads.

    Results are concatenated in pool order, so the batch content depends only
    on each pool's private stream.
    """

    def __init__(self, pools: list[ActorPool]):
        self.pools = pools
        self._executor = ThreadPoolExecutor(max_workers=len(pools))

    @property
    def frames(self) -> int:
        return sum(p.frames for p in self.pools)

    def generate(self, snapshot: ParameterSnapshot, n: int) -> RolloutBatch:
        parts = list(self._executor.map(lambda p: p.generate(snapshot, n), self.pools))
        return RolloutBatch([u for b in parts for u in b.unrolls], snapshot.version,
                            [r for b in parts for r in b.episode_returns])

    def get_state(self) -> dict:
        return {"pools": [p.get_state() for p in self.pools]}

    def set_state(self, state: dict) -> None:
        for p, s in zip(self.pools, state["pools"]):
            p.set_state(s)


def generate_batch(snapshot: ParameterSnapshot, env_factory: Callable[[int], Env],
                   num_unrolls: int, n: int, rng) -> RolloutBatch:
    """One batch from freshly reset environments; ``env_factory(i)`` builds slot ``i``."""
    envs = [env_factory(i) for i in range(num_unrolls)]
    seed = rng if isinstance(rng, (int, np.random.SeedSequence)) else int(rng.integers(2 ** 63))
    return ActorPool(envs, seed).generate(snapshot, n)


@dataclass
class EvalResult:
    returns: np.ndarray
    initial_observations: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def min(self) -> float:
        return float(np.min(self.returns))

    @property
    def max(self) -> float:
        return float(np.max(self.returns))


def run_episodes(snapshot: ParameterSnapshot, env_factory: Callable[[int], Env], episodes: int,
                 seed: int, mode_actions: bool = False, max_steps: int = 100_000) -> EvalResult:
    """Play ``episodes`` full episodes in lockstep and report undiscounted returns."""
    ss = np.random.SeedSequence(seed)
    env_seeds, act_seed = ss.spawn(2)
    rng = np.random.default_rng(act_seed)
    envs = [env_factory(i) for i in range(episodes)]
    obs = np.stack([env.reset(int(s.generate_state(1)[0]))
                    for env, s in zip(envs, env_seeds.spawn(episodes))])
    initial = obs.copy()
    returns = np.zeros(episodes)
    active = np.ones(episodes, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        actions, _ = _policy_step(snapshot, obs[idx], rng, mode=mode_actions)
        for j, e in enumerate(idx):
            o, r, done = envs[e].step(_to_env_action(envs[e], actions[j]))
            returns[e] += r
            obs[e] = o
            if done:
                active[e] = False
    return EvalResult(returns, initial)
