"""Adam on flat parameter vectors."""

from __future__ import annotations

from typing import Callable

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-7


def adam_step(params: np.ndarray, grads: np.ndarray, m: np.ndarray, v: np.ndarray,
              lr: float, step: int, beta1=BETA1, beta2: float = BETA2, eps: float = EPSILON,
              name_of: Callable[[int], str] | None = None):
    """One bias-corrected Adam update; ``step`` counts from 1.

    ``beta1`` may be a per-coordinate array. Returns new ``(params, m, v)``
    without touching the inputs.
    """
    if not (params.shape == grads.shape == m.shape == v.shape):
        raise ValueError(f"adam_step: shape mismatch params={params.shape} grads={grads.shape} "
                         f"m={m.shape} v={v.shape}")
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        where = name_of(int(bad[0])) if name_of else f"index {bad[0]}"
        raise FloatingPointError(f"adam_step: non-finite gradient for parameter {where}")
    if step < 1:
        raise ValueError("adam_step: step counts from 1")
    beta1 = np.asarray(beta1, dtype=np.float64)
    m = beta1 * m + (1.0 - beta1) * grads
    v = beta2 * v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), m, v
