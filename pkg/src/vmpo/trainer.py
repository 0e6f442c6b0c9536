"""The V-MPO learner loop: act with the target snapshot, evaluate, improve."""

from __future__ import annotations

import csv
import io
import logging
import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import returns as R
from .checkpoint import Checkpoint, CheckpointError
from .config import TrainConfig, parse_config
from .envs import make_env
from .network import ActionSpec, AgentNet, NetSpec, ParameterSnapshot
from .objective import LagrangeState, improvement_loss, project_multipliers, total_loss, value_loss
from .optim import adam_step
from .rollout import ActorPool, ParallelActors, run_episodes, target_gate

log = logging.getLogger(__name__)

METRICS_VERSION = 1
_COMMON_HEAD = ["step", "env_frames", "mean_return", "min_return", "max_return", "train_return",
                "loss_v", "loss_pi", "loss_eta"]
_COMMON_TAIL = ["kl_mean", "adv_abs_mean", "popart_mu", "popart_sigma", "norm_target_absmax"]
DISCRETE_FIELDS = _COMMON_HEAD + ["loss_alpha", "eta", "alpha"] + _COMMON_TAIL
CONTINUOUS_FIELDS = (_COMMON_HEAD + ["loss_alpha_mu", "loss_alpha_sigma", "eta", "alpha_mu", "alpha_sigma"]
                     + _COMMON_TAIL + ["kl_mu", "kl_sigma"])
EVAL_SEED_OFFSET = 10_007


class TrainingError(RuntimeError):
    pass


def metrics_fields(continuous: bool) -> list[str]:
    return CONTINUOUS_FIELDS if continuous else DISCRETE_FIELDS


def metrics_preamble(continuous: bool) -> str:
    kind = "continuous" if continuous else "discrete"
    return f"# vmpo-metrics v{METRICS_VERSION} {kind}\n"


def format_row(row: dict, fields: list[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [repr(float(row[f])) if isinstance(row[f], float) else row[f] for f in fields])
    return buf.getvalue()


def read_metrics(path) -> tuple[list[str], list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = [{k: float(v) for k, v in r.items()} for r in reader]
    return list(reader.fieldnames or []), rows


def env_factory(config: TrainConfig, offset: int = 0):
    scales = config.reward_scales

    def make(i):
        task = (i + offset) % config.num_tasks
        return make_env(config.env, task_id=task, reward_scale=scales[task], **config.env_params)
    return make


def net_spec_for(config: TrainConfig) -> NetSpec:
    probe = make_env(config.env, **config.env_params)
    return NetSpec(probe.obs_dim, probe.action_spec, config.num_tasks,
                   config.trunk_widths, config.head)


def initial_lagrange(config: TrainConfig, continuous: bool) -> LagrangeState:
    kw = dict(eta=config.init_eta, alpha=config.init_alpha, alpha_mu=config.init_alpha_mu,
              alpha_sigma=config.init_alpha_sigma, eps_alpha=config.eps_alpha,
              eps_alpha_mu=config.eps_alpha_mu, eps_alpha_sigma=config.eps_alpha_sigma)
    if config.eps_eta is not None:
        kw["eps_eta"] = config.eps_eta
    if continuous:
        return LagrangeState.continuous_defaults(**kw)
    return LagrangeState.discrete_defaults(**kw)


class Trainer:
    def __init__(self, config: TrainConfig):
        self.config = config
        root = np.random.SeedSequence(config.seed)
        init_ss, actor_ss = root.spawn(2)
        self.spec = net_spec_for(config)
        self.continuous = not self.spec.action.discrete
        self.net = AgentNet.create(self.spec, np.random.default_rng(init_ss))
        self.lagrange = initial_lagrange(config, self.continuous)
        self.stats = R.PopArtStats.create(config.num_tasks, config.popart_step)
        # channels start from the moments of their first batch; from the unit
        # prior a step of 1e-4 would leave early targets far outside [-10, 10]
        self.popart_seeded = [False] * config.num_tasks
        size = self.net.params.size + len(self.lagrange.names)
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        # multipliers get no momentum, so each update moves them along the sign
        # of the current constraint violation
        self.beta1 = np.full(size, 0.9)
        self.beta1[self.net.params.size:] = 0.0
        self.step_count = 0
        self.targets: deque[ParameterSnapshot] = deque(maxlen=config.behavior_lag + 1)
        self.last_eval = (0.0, 0.0, 0.0)
        self.last_train_return = 0.0
        self.last_terms = None
        make = env_factory(config)
        envs = [make(i) for i in range(config.num_unrolls)]
        if config.parallel_actors > 1:
            groups = np.array_split(np.arange(config.num_unrolls), config.parallel_actors)
            seeds = actor_ss.spawn(len(groups))
            self.actors = ParallelActors([ActorPool([envs[i] for i in g], s)
                                          for g, s in zip(groups, seeds)])
        else:
            self.actors = ActorPool(envs, actor_ss)

    # ------------------------------------------------------------- acting

    @property
    def target(self) -> ParameterSnapshot:
        return self.targets[-1]

    @property
    def behavior(self) -> ParameterSnapshot:
        return self.targets[0]

    @property
    def env_frames(self) -> int:
        return self.actors.frames

    def online_snapshot(self) -> ParameterSnapshot:
        flat = self.net.params.flat.copy()
        flat.flags.writeable = False
        return ParameterSnapshot(self.spec, flat, -1)

    def evaluate(self, episodes: int | None = None, seed: int | None = None,
                 mode_actions: bool | None = None):
        cfg = self.config
        return run_episodes(
            self.online_snapshot(), env_factory(cfg), episodes or cfg.eval_episodes,
            cfg.seed + EVAL_SEED_OFFSET if seed is None else seed,
            cfg.eval_mode_actions if mode_actions is None else mode_actions)

    # ------------------------------------------------------------ learning

    def step(self) -> dict:
        cfg = self.config
        if target_gate(self.step_count, cfg.t_target):
            self.targets.append(self.net.snapshot())
        batch = self.actors.generate(self.behavior, cfg.unroll_length)
        obs = batch.observations
        tasks = batch.tasks
        n = len(tasks)
        onehot = np.eye(cfg.num_tasks)[tasks]

        # policy evaluation targets from the online value function
        _, v_norm = self.net.forward(obs)
        _, v_boot_norm = self.net.forward(batch.bootstrap_observations)
        v = R.denormalize(self.stats, v_norm.data[np.arange(n), tasks], tasks)
        u_tasks = batch.unroll_tasks
        v_boot = R.denormalize(self.stats, v_boot_norm.data[np.arange(len(u_tasks)), u_tasks], u_tasks)
        g = np.empty(n)
        pos = 0
        for k, u in enumerate(batch.unrolls):
            m = len(u)
            vals = np.append(v[pos:pos + m], v_boot[k])
            g[pos:pos + m] = R.n_step_returns(u.rewards, vals, cfg.gamma, u.terminal)
            pos += m
        adv = R.advantages(g, v)

        new_stats = self.stats
        for t in range(cfg.num_tasks):
            sel = tasks == t
            if not sel.any():
                continue
            if self.popart_seeded[t]:
                new_stats = R.popart_update(new_stats, g[sel], t)
            else:
                new_stats = R.popart_initialize(new_stats, g[sel], t)
                self.popart_seeded[t] = True
        self.net.popart_compensate(self.stats, new_stats)
        self.stats = new_stats
        g_norm = R.normalize(self.stats, g, tasks)

        leaves = self.net.params.leaves()
        mults = {name: ad.Tensor(val, requires_grad=True)
                 for name, val in zip(self.lagrange.names, self.lagrange.vector())}
        dist, values = self.net.forward(obs, leaves)
        l_v = value_loss((values * onehot).sum(axis=1), g_norm)
        target_dist, _ = self.target.forward(obs)
        terms = improvement_loss(
            dist, target_dist, batch.actions, adv.advantages, mults, self.lagrange,
            batch.behavior_log_probs if cfg.importance_weighting else None)
        loss = total_loss(l_v, terms.total)
        self.last_terms = terms

        parts = {"loss_v": float(l_v.data), "loss_pi": float(terms.policy.data),
                 "loss_eta": float(terms.temperature.data)}
        parts.update({f"loss_{k}": float(t.data) for k, t in terms.alpha.items()})
        if not np.isfinite(loss.data):
            raise TrainingError(f"non-finite loss at learn step {self.step_count + 1}: {parts}")

        ad.backward(loss)
        grads = np.concatenate([self.net.params.grad_vector(leaves),
                                [mults[k].grad for k in self.lagrange.names]])
        flat = np.concatenate([self.net.params.flat, self.lagrange.vector()])
        self.step_count += 1
        psize = self.net.params.size

        def name_of(i):
            return self.net.params.name_of(i) if i < psize else self.lagrange.names[i - psize]
        flat, self.m, self.v = adam_step(flat, grads, self.m, self.v, cfg.learning_rate,
                                         self.step_count, beta1=self.beta1, name_of=name_of)
        used = dict(zip(self.lagrange.names, self.lagrange.vector()))
        self.net.params.flat = flat[:psize].copy()
        self.lagrange = project_multipliers(self.lagrange.with_vector(flat[psize:]))

        if batch.episode_returns:
            self.last_train_return = float(np.mean(batch.episode_returns))
        if (self.step_count == 1 or self.step_count % cfg.eval_interval == 0
                or self.step_count == cfg.learn_steps):
            res = self.evaluate()
            self.last_eval = (res.mean, res.min, res.max)
        row = {"step": self.step_count, "env_frames": self.env_frames,
               "mean_return": self.last_eval[0], "min_return": self.last_eval[1],
               "max_return": self.last_eval[2], "train_return": self.last_train_return}
        row.update(parts)
        row.update({k: float(v) for k, v in used.items()})
        row.update({
            "kl_mean": float(np.mean(terms.kl["total"])),
            "adv_abs_mean": float(np.mean(np.abs(adv.advantages))),
            "popart_mu": float(self.stats.mu[0]),
            "popart_sigma": float(self.stats.sigma[0]),
            "norm_target_absmax": float(np.max(np.abs(g_norm))),
        })
        if self.continuous:
            row["kl_mu"] = float(np.mean(terms.kl["mu"]))
            row["kl_sigma"] = float(np.mean(terms.kl["sigma"]))
        for k, val in row.items():
            if not np.isfinite(val):
                raise TrainingError(f"non-finite metric {k} at learn step {self.step_count}: {row}")
        return row

    # --------------------------------------------------------- persistence

    def to_checkpoint(self) -> Checkpoint:
        meta = {
            "config": self.config.to_text(),
            "slices": [[name, list(shape)] for name, shape in self.net.params.shapes.items()],
            "lagrange_names": list(self.lagrange.names),
            "step": self.step_count,
            "last_version": self.net.last_version,
            "target_versions": [t.version for t in self.targets],
            "last_eval": list(self.last_eval),
            "last_train_return": self.last_train_return,
            "popart_tasks": self.stats.num_tasks,
            "popart_seeded": list(self.popart_seeded),
        }
        targets = (np.concatenate([t.flat for t in self.targets]) if self.targets else np.zeros(0))
        return Checkpoint(
            meta=meta,
            parameters=self.net.params.flat.copy(),
            targets=targets,
            lagrange=self.lagrange.vector(),
            popart=np.concatenate([self.stats.mu, self.stats.nu]),
            optimizer=np.concatenate([self.m, self.v]),
            rng=self.actors.get_state(),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "Trainer":
        config = parse_config(ckpt.meta["config"])
        tr = cls(config)
        shapes = {name: tuple(shape) for name, shape in ckpt.meta["slices"]}
        if shapes != tr.net.params.shapes:
            raise CheckpointError("checkpoint parameter layout does not match its config")
        tr.net.params.flat = np.array(ckpt.parameters)
        tr.net.last_version = ckpt.meta["last_version"]
        psize = tr.net.params.size
        for k, version in enumerate(ckpt.meta["target_versions"]):
            flat = np.array(ckpt.targets[k * psize:(k + 1) * psize])
            flat.flags.writeable = False
            tr.targets.append(ParameterSnapshot(tr.spec, flat, version))
        tr.lagrange = tr.lagrange.with_vector(ckpt.lagrange)
        t = ckpt.meta["popart_tasks"]
        tr.stats = R.PopArtStats(np.array(ckpt.popart[:t]), np.array(ckpt.popart[t:]),
                                 config.popart_step)
        tr.popart_seeded = list(ckpt.meta["popart_seeded"])
        half = len(ckpt.optimizer) // 2
        tr.m, tr.v = np.array(ckpt.optimizer[:half]), np.array(ckpt.optimizer[half:])
        tr.step_count = ckpt.meta["step"]
        tr.last_eval = tuple(ckpt.meta["last_eval"])
        tr.last_train_return = ckpt.meta["last_train_return"]
        tr.actors.set_state(ckpt.rng)
        return tr

    def save(self, path) -> None:
        self.to_checkpoint().save(path)

    @classmethod
    def load(cls, path) -> "Trainer":
        return cls.from_checkpoint(Checkpoint.load(path))

    # ----------------------------------------------------------------- loop

    def run(self, out_dir=None, steps: int | None = None) -> "TrainResult":
        cfg = self.config
        out_dir = out_dir or cfg.out_dir
        os.makedirs(out_dir, exist_ok=True)
        metrics_path = os.path.join(out_dir, "metrics.csv")
        ckpt_path = os.path.join(out_dir, "checkpoint.vmpo")
        fields = metrics_fields(self.continuous)
        remaining = cfg.learn_steps - self.step_count if steps is None else steps
        with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(metrics_preamble(self.continuous))
            fh.write(",".join(fields) + "\n")
            for _ in range(remaining):
                row = self.step()
                fh.write(format_row(row, fields))
                if cfg.checkpoint_interval and self.step_count % cfg.checkpoint_interval == 0:
                    self.save(ckpt_path)
                if self.step_count % max(cfg.eval_interval, 1) == 0:
                    log.info("step %d frames %d return %.3f eta %.4g kl %.3g", self.step_count,
                             row["env_frames"], row["mean_return"], row["eta"], row["kl_mean"])
        self.save(ckpt_path)
        return TrainResult(ckpt_path, metrics_path, self)


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    trainer: Trainer


def train(config: TrainConfig, out_dir=None) -> TrainResult:
    return Trainer(config).run(out_dir)


def evaluate(checkpoint, episodes: int, seed: int, mode_actions: bool = False,
             env: str | None = None):
    """Play episodes with the online policy stored in a checkpoint (path or object)."""
    ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else Checkpoint.load(checkpoint)
    config = parse_config(ckpt.meta["config"])
    if env is not None and env != config.env:
        raise CheckpointError(f"checkpoint was trained on {config.env!r}, not {env!r}")
    spec = net_spec_for(config)
    shapes = {name: tuple(shape) for name, shape in ckpt.meta["slices"]}
    if shapes != spec.shapes():
        raise CheckpointError("checkpoint parameters do not match the environment's network")
    flat = np.array(ckpt.parameters)
    flat.flags.writeable = False
    snap = ParameterSnapshot(spec, flat, -1)
    return run_episodes(snap, env_factory(config), episodes, seed, mode_actions)
