"""Categorical and diagonal-Gaussian action distributions.

Parameters are held as :class:`~vmpo.autodiff.Tensor` so that log-probs and
KL divergences can be differentiated; plain arrays are wrapped as constants.
All functions treat the last axis as the event axis and any leading axes as
batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LOG_2PI = math.log(2.0 * math.pi)
STD_FLOOR = 1e-4


@dataclass(frozen=True)
class Categorical:
    logits: Tensor

    def __post_init__(self):
        object.__setattr__(self, "logits", ad.as_tensor(self.logits))

    @property
    def num_actions(self) -> int:
        return self.logits.shape[-1]

    def probs(self) -> np.ndarray:
        return ad.softmax(self.logits.data, axis=-1).data

    def mode(self) -> np.ndarray:
        return np.argmax(self.logits.data, axis=-1)


@dataclass(frozen=True)
class DiagGaussian:
    mean: Tensor
    std: Tensor

    def __post_init__(self):
        object.__setattr__(self, "mean", ad.as_tensor(self.mean))
        object.__setattr__(self, "std", ad.as_tensor(self.std))
        if self.mean.shape != self.std.shape:
            raise ad.ShapeError(f"DiagGaussian: mean {self.mean.shape} vs std {self.std.shape}")
        if np.any(self.std.data <= 0):
            raise ValueError("DiagGaussian: stddev must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def mode(self) -> np.ndarray:
        return np.array(self.mean.data)


PolicyDistribution = Categorical | DiagGaussian


def detach(dist: PolicyDistribution) -> PolicyDistribution:
    if isinstance(dist, Categorical):
        return Categorical(ad.stop_gradient(dist.logits))
    return DiagGaussian(ad.stop_gradient(dist.mean), ad.stop_gradient(dist.std))


def index(dist: PolicyDistribution, idx) -> PolicyDistribution:
    """Select rows of a batched distribution."""
    if isinstance(dist, Categorical):
        return Categorical(dist.logits[idx])
    return DiagGaussian(dist.mean[idx], dist.std[idx])


def log_prob(dist: PolicyDistribution, action) -> Tensor:
    if isinstance(dist, Categorical):
        a = np.asarray(action)
        k = dist.num_actions
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.equal(np.mod(a, 1), 0)):
                raise ValueError(f"log_prob: non-integer discrete action {action!r}")
            a = a.astype(np.int64)
        if np.any(a < 0) or np.any(a >= k):
            raise ValueError(f"log_prob: action {action!r} outside [0, {k})")
        if a.shape != dist.logits.shape[:-1]:
            raise ad.ShapeError(f"log_prob: actions {a.shape} vs logits {dist.logits.shape}")
        onehot = np.eye(k)[a]
        return (ad.log_softmax(dist.logits, axis=-1) * onehot).sum(axis=-1)
    a = np.asarray(action, dtype=np.float64)
    if a.shape != dist.mean.shape:
        raise ad.ShapeError(f"log_prob: action {a.shape} vs mean {dist.mean.shape}")
    z = (a - dist.mean) / dist.std
    per_dim = -0.5 * z.square() - dist.std.log() - 0.5 * LOG_2PI
    return per_dim.sum(axis=-1)


def sample(dist: PolicyDistribution, rng: np.random.Generator) -> np.ndarray:
    """Draw one action per batch row. Deterministic given the generator state."""
    if isinstance(dist, Categorical):
        p = dist.probs()
        cdf = np.cumsum(p, axis=-1)
        u = rng.random(p.shape[:-1] + (1,))
        # guard against cdf[-1] rounding below u
        idx = (u >= cdf).sum(axis=-1)
        return np.minimum(idx, dist.num_actions - 1)
    noise = rng.standard_normal(dist.mean.shape)
    return dist.mean.data + dist.std.data * noise


def kl_categorical(old: Categorical, new: Categorical) -> Tensor:
    """KL(old || new) per batch row, fully in log space."""
    if old.logits.shape != new.logits.shape:
        raise ad.ShapeError(f"kl_categorical: {old.logits.shape} vs {new.logits.shape}")
    log_p = ad.log_softmax(old.logits, axis=-1)
    log_q = ad.log_softmax(new.logits, axis=-1)
    return (log_p.exp() * (log_p - log_q)).sum(axis=-1)


def _check_same_dim(kind, old, new):
    if old.mean.shape != new.mean.shape:
        raise ad.ShapeError(f"{kind}: {old.mean.shape} vs {new.mean.shape}")


def kl_gaussian_mean(old: DiagGaussian, new: DiagGaussian) -> Tensor:
    """0.5 (mu_new - mu_old)^T Sigma_old^-1 (mu_new - mu_old); ignores new's stddev."""
    _check_same_dim("kl_gaussian_mean", old, new)
    diff = new.mean - old.mean
    return 0.5 * (diff.square() / old.std.square()).sum(axis=-1)


def kl_gaussian_cov(old: DiagGaussian, new: DiagGaussian) -> Tensor:
    """0.5 [Tr(Sigma_new^-1 Sigma_old) - d + log |Sigma_new|/|Sigma_old|]; ignores both means."""
    _check_same_dim("kl_gaussian_cov", old, new)
    ratio = old.std.square() / new.std.square()
    # log|Sigma_new| - log|Sigma_old| = -log(ratio) per dimension
    return 0.5 * (ratio - 1.0 - ratio.log()).sum(axis=-1)


def kl_gaussian_total(old: DiagGaussian, new: DiagGaussian) -> Tensor:
    """Exact KL(old || new) between diagonal Gaussians.

    The quadratic term is weighted by the *new* covariance, so this equals
    ``kl_gaussian_mean + kl_gaussian_cov`` only when the stddevs or the
    means coincide.
    """
    _check_same_dim("kl_gaussian_total", old, new)
    diff = new.mean - old.mean
    quad = 0.5 * (diff.square() / new.std.square()).sum(axis=-1)
    return quad + kl_gaussian_cov(old, new)


def kl(old: PolicyDistribution, new: PolicyDistribution) -> Tensor:
    if isinstance(old, Categorical):
        return kl_categorical(old, new)
    return kl_gaussian_total(old, new)


def std_from_raw(raw: Tensor) -> Tensor:
    """Positive stddev from an unconstrained output: softplus plus a floor."""
    return ad.softplus(raw) + STD_FLOOR


def raw_for_std(std: float) -> float:
    """Inverse of :func:`std_from_raw` for a scalar stddev."""
    y = std - STD_FLOOR
    return float(y + math.log(-math.expm1(-y)))
