"""Independent reference solvers used to check learned behavior."""

from __future__ import annotations

import math

import numpy as np


def _q_values(P, R, V, gamma):
    return np.einsum("sat,sat->sa", P, R + gamma * V[None, None, :])


def value_iteration(P: np.ndarray, R: np.ndarray, gamma: float, tol: float = 1e-12,
                    max_iter: int = 100_000):
    """Optimal values and greedy policy of a finite MDP.

    ``P[s, a, s']`` are transition probabilities and ``R[s, a, s']`` rewards.
    Returns ``(V, policy, residual)`` where ``residual`` is the sup-norm
    Bellman residual of the returned ``V``.
    """
    V = np.zeros(P.shape[0])
    for _ in range(max_iter):
        V_new = _q_values(P, R, V, gamma).max(axis=1)
        done = np.max(np.abs(V_new - V)) < tol
        V = V_new
        if done:
            break
    Q = _q_values(P, R, V, gamma)
    residual = float(np.max(np.abs(Q.max(axis=1) - V)))
    return V, Q.argmax(axis=1), residual


def _policy_matrices(P, R, policy):
    idx = np.arange(P.shape[0])
    P_pi = P[idx, policy]
    R_pi = np.sum(P_pi * R[idx, policy], axis=1)
    return P_pi, R_pi


def policy_evaluation(P: np.ndarray, R: np.ndarray, policy, gamma: float) -> np.ndarray:
    """Exact discounted values of a deterministic policy by a linear solve."""
    P_pi, R_pi = _policy_matrices(P, R, np.asarray(policy))
    return np.linalg.solve(np.eye(P.shape[0]) - gamma * P_pi, R_pi)


def undiscounted_return(P: np.ndarray, R: np.ndarray, policy, start: int, max_steps: int) -> float:
    """Expected undiscounted return of a deterministic policy over ``max_steps`` steps."""
    P_pi, R_pi = _policy_matrices(P, R, np.asarray(policy))
    d = np.zeros(P.shape[0])
    d[start] = 1.0
    total = 0.0
    for _ in range(max_steps):
        total += float(d @ R_pi)
        d = d @ P_pi
    return total


def finite_horizon_lqr(A, B, Q, R, horizon: int):
    """Backward Riccati recursion for sum_t x'Qx + u'Ru over ``horizon`` steps.

    Returns ``(gains, P0)`` with ``u_t = -gains[t] x_t`` and optimal cost
    ``x0' P0 x0``.
    """
    P = np.zeros_like(Q)
    gains = []
    for _ in range(horizon):
        S = R + B.T @ P @ B
        K = np.linalg.solve(S, B.T @ P @ A)
        P = Q + A.T @ P @ (A - B @ K)
        P = 0.5 * (P + P.T)
        gains.append(K)
    return gains[::-1], P


def lqr_rollout_cost(A, B, Q, R, gains, x0, clip: float | None = None) -> float:
    """Cost of running the given linear gains from ``x0`` (optionally clipping u)."""
    x = np.asarray(x0, dtype=np.float64)
    cost = 0.0
    for K in gains:
        u = -K @ x
        if clip is not None:
            u = np.clip(u, -clip, clip)
        cost += float(x @ Q @ x + u @ R @ u)
        x = A @ x + B @ u
    return cost


def golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Minimizer of a unimodal scalar function on ``[lo, hi]``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(c) + abs(d)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)
