"""The V-MPO policy-improvement objective and policy-evaluation loss.

Losses are built as autodiff graphs so one backward pass over their sum
yields gradients for the network, the temperature and the trust-region
multipliers at once. Stop-gradients separate the coordinate-descent roles:
advantages and weights are constants for the policy, the KL is a constant
for the multiplier and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import distributions as dists
from .autodiff import Tensor

MULTIPLIER_FLOOR = 1e-8


@dataclass(frozen=True)
class LagrangeState:
    """Temperature and trust-region multipliers with their constraint bounds.

    Discrete policies use a single ``alpha``; Gaussian policies use the
    decoupled ``alpha_mu`` / ``alpha_sigma`` pair.
    """

    continuous: bool
    eta: float = 1.0
    alpha: float = 5.0
    alpha_mu: float = 1.0
    alpha_sigma: float = 1.0
    eps_eta: float = 0.1
    eps_alpha: float = 0.005
    eps_alpha_mu: float = 0.05
    eps_alpha_sigma: float = 1e-5
    floor: float = MULTIPLIER_FLOOR

    def __post_init__(self):
        for name in ("eps_eta", "eps_alpha", "eps_alpha_mu", "eps_alpha_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"LagrangeState: {name} must be positive")

    @classmethod
    def discrete_defaults(cls, **kw) -> "LagrangeState":
        return cls(continuous=False, **kw)

    @classmethod
    def continuous_defaults(cls, **kw) -> "LagrangeState":
        kw.setdefault("eps_eta", 0.01)
        return cls(continuous=True, **kw)

    @property
    def names(self) -> tuple[str, ...]:
        return ("eta", "alpha_mu", "alpha_sigma") if self.continuous else ("eta", "alpha")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names])

    def with_vector(self, values) -> "LagrangeState":
        return replace(self, **{n: float(v) for n, v in zip(self.names, values)})


def project_multipliers(state: LagrangeState) -> LagrangeState:
    return state.with_vector(np.maximum(state.vector(), state.floor))


# ------------------------------------------------------------------ E-step

@dataclass(frozen=True)
class SelectionMask:
    mask: np.ndarray
    indices: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.indices)


def select_top_half(advantages) -> SelectionMask:
    """Top ceil(|D|/2) advantages; ties go to the lower sample index."""
    a = np.asarray(advantages, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError("select_top_half: empty batch")
    if not np.all(np.isfinite(a)):
        raise ValueError("select_top_half: non-finite advantages")
    k = math.ceil(a.size / 2)
    order = np.argsort(-a, kind="stable")[:k]
    idx = np.sort(order)
    mask = np.zeros(a.size, dtype=bool)
    mask[idx] = True
    return SelectionMask(mask, idx)


def importance_weights(log_p_target, log_p_behavior) -> np.ndarray:
    """Clipped ratio min(1, pi_target / pi_behavior)."""
    lt = np.asarray(log_p_target, dtype=np.float64)
    lb = np.asarray(log_p_behavior, dtype=np.float64)
    if not (np.all(np.isfinite(lt)) and np.all(np.isfinite(lb))):
        raise ValueError("importance_weights: non-finite log-probs")
    return np.exp(np.minimum(0.0, lt - lb))


def psi_weights(selected_advantages, eta: float, rho=None) -> np.ndarray:
    """Softmax of A/eta (optionally times rho) over the selected samples."""
    a = np.asarray(selected_advantages, dtype=np.float64)
    logits = a / eta
    if rho is not None:
        logits = logits + np.log(np.asarray(rho, dtype=np.float64))
    return ad.softmax(logits, axis=-1).data


def policy_loss(weights, log_probs: Tensor) -> Tensor:
    """-sum psi log pi; the weights are constants."""
    w = np.asarray(weights, dtype=np.float64)
    log_probs = ad.as_tensor(log_probs)
    if w.shape != log_probs.shape:
        raise ad.ShapeError(f"policy_loss: weights {w.shape} vs log_probs {log_probs.shape}")
    return -(log_probs * w).sum()


def temperature_loss(selected_advantages, eta, eps_eta: float, rho=None) -> Tensor:
    """eta*eps + eta*log mean exp(A/eta), with rho multiplying each exp term if given."""
    a = np.asarray(selected_advantages, dtype=np.float64)
    eta = ad.as_tensor(eta)
    logits = ad.Tensor(a) / eta
    if rho is not None:
        logits = logits + np.log(np.asarray(rho, dtype=np.float64))
    log_mean = ad.logsumexp(logits) - math.log(a.size)
    return eta * eps_eta + eta * log_mean


# ------------------------------------------------------------------ M-step

def alpha_loss(kl_per_state: Tensor, alpha, eps_alpha: float) -> Tensor:
    """mean_s [alpha (eps - sg[KL_s]) + sg[alpha] KL_s] over the full batch."""
    kl = ad.as_tensor(kl_per_state)
    alpha = ad.as_tensor(alpha)
    per_state = alpha * (eps_alpha - ad.stop_gradient(kl)) + ad.stop_gradient(alpha) * kl
    return per_state.mean()


def decoupled_alpha_losses(kl_mean, kl_cov, alpha_mu, alpha_sigma,
                           eps_alpha_mu: float, eps_alpha_sigma: float) -> Tensor:
    return (alpha_loss(kl_mean, alpha_mu, eps_alpha_mu)
            + alpha_loss(kl_cov, alpha_sigma, eps_alpha_sigma))


# ------------------------------------------------------------ evaluation

def value_loss(values, targets) -> Tensor:
    """Half mean squared error."""
    values = ad.as_tensor(values)
    t = np.asarray(targets, dtype=np.float64)
    if values.shape != t.shape:
        raise ad.ShapeError(f"value_loss: values {values.shape} vs targets {t.shape}")
    return 0.5 * (values - t).square().mean()


def total_loss(*components) -> Tensor:
    out = ad.as_tensor(0.0)
    for c in components:
        out = out + c
    return out


# ------------------------------------------------------------ assembly

@dataclass
class ImprovementTerms:
    policy: Tensor
    temperature: Tensor
    alpha: dict
    selection: SelectionMask
    weights: np.ndarray
    kl: dict
    rho: np.ndarray | None

    @property
    def total(self) -> Tensor:
        return total_loss(self.policy, self.temperature, *self.alpha.values())


def improvement_loss(online: dists.PolicyDistribution, target: dists.PolicyDistribution,
                     actions, adv, multipliers: dict, state: LagrangeState,
                     behavior_log_probs=None) -> ImprovementTerms:
    """Build L_pi + L_eta + L_alpha for one batch.

    ``online`` is the differentiable policy on the batch states and
    ``target`` the frozen old policy on the same states. ``multipliers`` maps
    the names in ``state.names`` to scalar tensors. Passing
    ``behavior_log_probs`` enables the clipped importance-weight correction.
    """
    adv = np.asarray(adv, dtype=np.float64)
    sel = select_top_half(adv)
    rho = None
    if behavior_log_probs is not None:
        target_logp = dists.log_prob(target, actions).data
        rho = importance_weights(target_logp, behavior_log_probs)
    rho_sel = None if rho is None else rho[sel.indices]
    eta = multipliers["eta"]
    weights = psi_weights(adv[sel.indices], float(ad.as_tensor(eta).data), rho_sel)
    logp = dists.log_prob(online, actions)
    l_pi = policy_loss(weights, logp[sel.indices])
    l_eta = temperature_loss(adv[sel.indices], eta, state.eps_eta, rho_sel)

    old = dists.detach(target)
    if state.continuous:
        kl_mu = dists.kl_gaussian_mean(old, online)
        kl_sigma = dists.kl_gaussian_cov(old, online)
        alpha = {
            "alpha_mu": alpha_loss(kl_mu, multipliers["alpha_mu"], state.eps_alpha_mu),
            "alpha_sigma": alpha_loss(kl_sigma, multipliers["alpha_sigma"], state.eps_alpha_sigma),
        }
        kl = {"mu": kl_mu.data, "sigma": kl_sigma.data,
              "total": dists.kl_gaussian_total(old, online).data}
    else:
        kl_all = dists.kl_categorical(old, online)
        alpha = {"alpha": alpha_loss(kl_all, multipliers["alpha"], state.eps_alpha)}
        kl = {"total": kl_all.data}
    return ImprovementTerms(l_pi, l_eta, alpha, sel, weights, kl, rho)
