"""Toy environments with computable optima, plus a name registry.

Each environment owns its random generator; given the construction seed
and the action sequence, trajectories are fully deterministic.

``step`` reports ``done`` for both real terminations and time-limit cuts;
after a cut ``truncated`` is set so learners can bootstrap through it.
"""

from __future__ import annotations

import math

import numpy as np

from .network import ActionSpec


class Env:
    name = "env"
    obs_dim: int
    action_spec: ActionSpec

    def __init__(self, seed: int | None = None, task_id: int = 0, reward_scale: float = 1.0):
        self.rng = np.random.default_rng(seed)
        self.task_id = task_id
        self.reward_scale = float(reward_scale)
        self.t = 0
        self.truncated = False

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self.truncated = False
        return self._reset()

    @property
    def time_limit(self) -> int:
        raise NotImplementedError

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        obs, reward, terminated = self._step(action)
        self.t += 1
        self.truncated = not terminated and self.t >= self.time_limit
        return obs, reward * self.reward_scale, terminated or self.truncated

    # checkpointing: the full dynamic state as plain JSON-able values
    def get_state(self) -> dict:
        return {"t": self.t, "rng": self.rng.bit_generator.state, "x": self._get_x()}

    def set_state(self, state: dict) -> None:
        self.t = state["t"]
        self.truncated = False
        self.rng.bit_generator.state = state["rng"]
        self._set_x(state["x"])

    def _reset(self): raise NotImplementedError
    def _step(self, action): raise NotImplementedError
    def _get_x(self): raise NotImplementedError
    def _set_x(self, x): raise NotImplementedError


class ChainMDP(Env):
    """Walk along ``length`` cells starting at cell 0.

    Stepping right into the last cell pays 1 and ends the episode; stepping
    left off cell 0 pays 0.01 and ends it. With probability ``slip`` the
    opposite action is executed. Episodes are capped at ``4 * length`` steps.
    """

    name = "chain"
    LEFT, RIGHT = 0, 1

    def __init__(self, length: int = 5, slip: float = 0.0, **kw):
        if length < 2:
            raise ValueError("chain_mdp: length must be >= 2")
        if not 0.0 <= slip < 1.0:
            raise ValueError("chain_mdp: slip must be in [0, 1)")
        super().__init__(**kw)
        self.length = int(length)
        self.slip = float(slip)
        self.obs_dim = self.length
        self.action_spec = ActionSpec(discrete=True, n=2)
        self.max_steps = 4 * self.length
        self.pos = 0

    def _obs(self):
        o = np.zeros(self.length)
        o[self.pos] = 1.0
        return o

    def _reset(self):
        self.pos = 0
        return self._obs()

    def _step(self, action):
        a = int(action)
        if self.slip > 0.0 and self.rng.random() < self.slip:
            a = 1 - a
        if a == self.RIGHT:
            self.pos += 1
            if self.pos == self.length - 1:
                return self._obs(), 1.0, True
        else:
            if self.pos == 0:
                return self._obs(), 0.01, True
            self.pos -= 1
        return self._obs(), 0.0, False

    @property
    def time_limit(self):
        return self.max_steps

    def _get_x(self):
        return [self.pos]

    def _set_x(self, x):
        self.pos = int(x[0])

    def transition_model(self):
        """Tabular (P, R, terminal) over cells 0..length-1 for oracle solvers.

        ``P[s, a, s']`` are next-state probabilities and ``R[s, a, s']`` the
        expected rewards. Transitions that end the episode go to an absorbing
        sink with index ``length`` (the last real cell is never occupied).
        """
        n = self.length + 1
        sink = self.length
        P = np.zeros((n, 2, n))
        R = np.zeros((n, 2, n))
        for s in range(self.length - 1):
            for a in (self.LEFT, self.RIGHT):
                for executed, prob in ((a, 1.0 - self.slip), (1 - a, self.slip)):
                    if prob == 0.0:
                        continue
                    if executed == self.RIGHT:
                        nxt, r = (sink, 1.0) if s + 1 == self.length - 1 else (s + 1, 0.0)
                    else:
                        nxt, r = (sink, 0.01) if s == 0 else (s - 1, 0.0)
                    P[s, a, nxt] += prob
                    R[s, a, nxt] = r * self.reward_scale
        P[self.length - 1, :, sink] = 1.0
        P[sink, :, sink] = 1.0
        return P, R


class CartPole(Env):
    """Classic cart-pole balancing with explicit Euler integration."""

    name = "cartpole"
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_limit = 12 * 2 * math.pi / 360
    x_limit = 2.4
    max_steps = 500

    def __init__(self, **kw):
        super().__init__(**kw)
        self.obs_dim = 4
        self.action_spec = ActionSpec(discrete=True, n=2)
        self.state = np.zeros(4)

    def _reset(self):
        self.state = self.rng.uniform(-0.05, 0.05, size=4)
        return self.state.copy()

    def _step(self, action):
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if int(action) == 1 else -self.force_mag
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        cos, sin = math.cos(theta), math.sin(theta)
        temp = (force + polemass_length * theta_dot ** 2 * sin) / total_mass
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos ** 2 / total_mass))
        x_acc = temp - polemass_length * theta_acc * cos / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        failed = abs(x) > self.x_limit or abs(theta) > self.theta_limit
        return self.state.copy(), 1.0, bool(failed)

    @property
    def time_limit(self):
        return self.max_steps

    def _get_x(self):
        return [float(v) for v in self.state]

    def _set_x(self, x):
        self.state = np.array(x, dtype=np.float64)


class PointMass(Env):
    """Double integrator: x += dt v, v += dt a, reward -(|x|^2 + 0.1 |a|^2).

    Actions are clipped to [-1, 1] before use. Starts at rest with position
    uniform in ``[-start_range, start_range]^dim``. The default range keeps the
    optimal linear controller inside the action bounds.
    """

    name = "pointmass"
    action_cost = 0.1

    def __init__(self, dim: int = 2, dt: float = 0.05, horizon: int = 100,
                 start_range: float = 0.3, **kw):
        super().__init__(**kw)
        self.dim = int(dim)
        self.dt = float(dt)
        self.horizon = int(horizon)
        self.start_range = float(start_range)
        self.obs_dim = 2 * self.dim
        self.action_spec = ActionSpec(discrete=False, n=self.dim, low=-1.0, high=1.0)
        self.x = np.zeros(self.dim)
        self.v = np.zeros(self.dim)

    def _obs(self):
        return np.concatenate([self.x, self.v])

    def _reset(self):
        self.x = self.rng.uniform(-self.start_range, self.start_range, size=self.dim)
        self.v = np.zeros(self.dim)
        return self._obs()

    def set_start(self, x, v=None) -> np.ndarray:
        """Place the mass at a given state (episode clock reset)."""
        self.t = 0
        self.x = np.array(x, dtype=np.float64)
        self.v = np.zeros(self.dim) if v is None else np.array(v, dtype=np.float64)
        return self._obs()

    def _step(self, action):
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        reward = -(float(self.x @ self.x) + self.action_cost * float(a @ a))
        self.x = self.x + self.dt * self.v
        self.v = self.v + self.dt * a
        return self._obs(), reward, False

    @property
    def time_limit(self):
        return self.horizon

    def linear_model(self):
        """(A, B, Q, R) of the unclipped dynamics and per-step cost."""
        d, dt = self.dim, self.dt
        eye = np.eye(d)
        A = np.block([[eye, dt * eye], [np.zeros((d, d)), eye]])
        B = np.vstack([np.zeros((d, d)), dt * eye])
        Q = np.block([[eye, np.zeros((d, d))], [np.zeros((d, d)), np.zeros((d, d))]])
        R = self.action_cost * eye
        return A, B, Q, R

    def _get_x(self):
        return [float(v) for v in np.concatenate([self.x, self.v])]

    def _set_x(self, x):
        x = np.array(x, dtype=np.float64)
        self.x, self.v = x[:self.dim], x[self.dim:]


REGISTRY = {
    "chain": ChainMDP,
    "cartpole": CartPole,
    "pointmass": PointMass,
}


def make_env(name: str, **params) -> Env:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(REGISTRY)}") from None
    return cls(**params)


def chain_mdp(length: int = 5, slip: float = 0.0, **kw) -> ChainMDP:
    return ChainMDP(length, slip, **kw)


def cartpole(**kw) -> CartPole:
    return CartPole(**kw)


def point_mass(dim: int = 2, dt: float = 0.05, horizon: int = 100, **kw) -> PointMass:
    return PointMass(dim, dt, horizon, **kw)
