"""Shared-trunk policy/value MLP, parameter snapshots, and PopArt head compensation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterStore, Tensor
from .distributions import Categorical, DiagGaussian, PolicyDistribution, raw_for_std, std_from_raw

INIT_STD = 0.5


@dataclass(frozen=True)
class ActionSpec:
    """``discrete=True``: ``n`` actions. Otherwise ``n``-dim box ``[low, high]``."""

    discrete: bool
    n: int
    low: float = -1.0
    high: float = 1.0


@dataclass(frozen=True)
class NetSpec:
    obs_dim: int
    action: ActionSpec
    num_tasks: int = 1
    trunk: tuple = (64, 64)
    head: int = 64

    def shapes(self) -> dict[str, tuple]:
        shapes = {}
        prev = self.obs_dim
        for i, width in enumerate(self.trunk):
            shapes[f"trunk.w{i}"] = (prev, width)
            shapes[f"trunk.b{i}"] = (width,)
            prev = width
        out = self.action.n if self.action.discrete else 2 * self.action.n
        shapes.update({
            "policy.w_hidden": (prev, self.head), "policy.b_hidden": (self.head,),
            "policy.w_out": (self.head, out), "policy.b_out": (out,),
            "value.w_hidden": (prev, self.head), "value.b_hidden": (self.head,),
            "value.w_out": (self.head, self.num_tasks), "value.b_out": (self.num_tasks,),
        })
        return shapes


def init_params(spec: NetSpec, rng: np.random.Generator) -> ParameterStore:
    """Scaled-uniform fan-in init; small policy readout so initial logits are near uniform."""
    store = ParameterStore(spec.shapes())
    for name, shape in store.shapes.items():
        if len(shape) != 2:
            continue
        gain = 0.01 if name == "policy.w_out" else 1.0
        bound = gain * np.sqrt(3.0 / shape[0])
        store[name] = rng.uniform(-bound, bound, size=shape)
    if not spec.action.discrete:
        b = np.zeros(2 * spec.action.n)
        b[spec.action.n:] = raw_for_std(INIT_STD)
        store["policy.b_out"] = b
    return store


def forward_params(spec: NetSpec, p: dict, obs) -> tuple[PolicyDistribution, Tensor]:
    """Run the network on a batch of observations.

    ``p`` maps parameter names to tensors (leaves or constants). Returns the
    policy distribution and the normalized values, shape ``(batch, num_tasks)``.
    """
    x = ad.as_tensor(obs)
    single = x.ndim == 1
    if single:
        x = ad.Tensor(x.data.reshape(1, -1))
    if x.ndim != 2 or x.shape[1] != spec.obs_dim:
        raise ad.ShapeError(f"forward: observation shape {x.shape} does not match obs_dim={spec.obs_dim}")
    h = x
    for i in range(len(spec.trunk)):
        h = ad.affine(h, p[f"trunk.w{i}"], p[f"trunk.b{i}"]).tanh()
    ph = ad.affine(h, p["policy.w_hidden"], p["policy.b_hidden"]).tanh()
    out = ad.affine(ph, p["policy.w_out"], p["policy.b_out"])
    vh = ad.affine(h, p["value.w_hidden"], p["value.b_hidden"]).tanh()
    values = ad.affine(vh, p["value.w_out"], p["value.b_out"])
    if spec.action.discrete:
        dist = Categorical(out[0] if single else out)
    else:
        d = spec.action.n
        mean, raw = out[:, :d], out[:, d:]
        if single:
            mean, raw = mean[0], raw[0]
        dist = DiagGaussian(mean, std_from_raw(raw))
    return dist, (values[0] if single else values)


@dataclass(frozen=True)
class ParameterSnapshot:
    spec: NetSpec
    flat: np.ndarray
    version: int

    def digest(self) -> str:
        return hashlib.sha256(self.flat.tobytes()).hexdigest()

    def forward(self, obs):
        return forward_params(self.spec, _constants(self.spec, self.flat), obs)

    def restore(self) -> "AgentNet":
        return AgentNet(self.spec, ParameterStore(self.spec.shapes(), self.flat.copy()), self.version)


def _constants(spec: NetSpec, flat: np.ndarray) -> dict:
    store = ParameterStore(spec.shapes(), flat)
    return {k: ad.Tensor(v) for k, v in store.unflatten().items()}


@dataclass
class AgentNet:
    spec: NetSpec
    params: ParameterStore = field(repr=False)
    last_version: int = 0

    @classmethod
    def create(cls, spec: NetSpec, rng: np.random.Generator) -> "AgentNet":
        return cls(spec, init_params(spec, rng))

    def forward(self, obs, leaves: dict | None = None):
        """Forward pass. Pass ``leaves`` (from ``params.leaves()``) to build a differentiable graph."""
        p = leaves if leaves is not None else _constants(self.spec, self.params.flat)
        return forward_params(self.spec, p, obs)

    def snapshot(self) -> ParameterSnapshot:
        flat = self.params.flat.copy()
        flat.flags.writeable = False
        self.last_version += 1
        return ParameterSnapshot(self.spec, flat, self.last_version)

    def popart_compensate(self, old_stats, new_stats) -> None:
        """Rescale the value readout so denormalized outputs are unchanged."""
        if old_stats.num_tasks != self.spec.num_tasks or new_stats.num_tasks != self.spec.num_tasks:
            raise ValueError("popart_compensate: stats channels do not match the value head")
        s_old, s_new = old_stats.sigma, new_stats.sigma
        if np.any(s_old <= 0) or np.any(s_new <= 0):
            raise ValueError("popart_compensate: scales must be positive")
        w = self.params["value.w_out"]
        b = self.params["value.b_out"]
        self.params["value.w_out"] = w * (s_old / s_new)
        self.params["value.b_out"] = (s_old * b + old_stats.mu - new_stats.mu) / s_new
