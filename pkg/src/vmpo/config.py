"""Training configuration and its flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
import inspect
from dataclasses import dataclass, field, fields

from .envs import REGISTRY


def _opt(default, doc):
    return field(default=default, metadata={"doc": doc})


@dataclass
class TrainConfig:
    env: str = _opt("chain", f"environment name, one of {sorted(REGISTRY)}")
    env_params: dict = _opt(None, "environment constructor arguments, given as env.<name>=<value> lines")
    num_tasks: int = _opt(1, "number of PopArt channels; actor i runs task i mod num_tasks")
    task_reward_scales: str = _opt("", "comma-separated reward multiplier per task (empty: all 1)")
    gamma: float = _opt(0.99, "discount factor in (0, 1)")
    unroll_length: int = _opt(16, "steps per unroll (n)")
    num_unrolls: int = _opt(64, "parallel environments; samples per batch = num_unrolls * unroll_length")
    learn_steps: int = _opt(1000, "number of learner updates")
    t_target: int = _opt(10, "learn steps between target-network refreshes")
    behavior_lag: int = _opt(0, "act with the target snapshot this many refreshes old (0: act with the target)")
    importance_weighting: bool = _opt(False, "apply clipped importance weights to the E-step")
    eps_eta: float = _opt(None, "temperature constraint (default 0.1 discrete, 0.01 continuous)")
    eps_alpha: float = _opt(0.005, "trust-region bound, discrete policies")
    eps_alpha_mu: float = _opt(0.05, "mean trust-region bound, Gaussian policies")
    eps_alpha_sigma: float = _opt(1e-5, "covariance trust-region bound, Gaussian policies")
    init_eta: float = _opt(1.0, "initial temperature")
    init_alpha: float = _opt(5.0, "initial trust-region multiplier, discrete")
    init_alpha_mu: float = _opt(1.0, "initial mean multiplier, Gaussian")
    init_alpha_sigma: float = _opt(1.0, "initial covariance multiplier, Gaussian")
    learning_rate: float = _opt(1e-4, "Adam learning rate")
    popart_step: float = _opt(1e-4, "per-sample step size of the PopArt moment averages")
    trunk: str = _opt("64,64", "hidden widths of the shared trunk")
    head: int = _opt(64, "hidden width of the policy and value heads")
    seed: int = _opt(0, "master seed")
    eval_interval: int = _opt(100, "learn steps between evaluations")
    eval_episodes: int = _opt(10, "episodes per evaluation")
    eval_mode_actions: bool = _opt(False, "evaluate with mode/mean actions instead of samples")
    parallel_actors: int = _opt(0, "split the environments over this many threaded actors (0: single actor)")
    checkpoint_interval: int = _opt(0, "learn steps between intermediate checkpoints (0: final only)")
    out_dir: str = _opt("runs/default", "output directory for metrics, checkpoints and plots")

    def __post_init__(self):
        if self.env_params is None:
            self.env_params = {}
        if self.env not in REGISTRY:
            raise ValueError(f"config: unknown env {self.env!r}; known: {sorted(REGISTRY)}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("config: gamma must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("config: learning_rate must be positive")
        for name in ("eps_eta", "eps_alpha", "eps_alpha_mu", "eps_alpha_sigma"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"config: {name} must be positive")
        for name in ("unroll_length", "num_unrolls", "t_target", "num_tasks", "eval_episodes", "eval_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"config: {name} must be >= 1")
        if self.learn_steps < 0 or self.behavior_lag < 0:
            raise ValueError("config: learn_steps and behavior_lag must be >= 0")
        if len(self.reward_scales) != self.num_tasks:
            raise ValueError("config: task_reward_scales needs one entry per task")
        _check_env_params(self.env, self.env_params)

    @property
    def reward_scales(self) -> list[float]:
        if not self.task_reward_scales:
            return [1.0] * self.num_tasks
        return [float(s) for s in self.task_reward_scales.split(",")]

    @property
    def trunk_widths(self) -> tuple:
        return tuple(int(w) for w in self.trunk.split(","))

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "env_params":
                lines.extend(f"env.{k}={_fmt(v)}" for k, v in sorted(val.items()))
            elif val is not None:
                lines.append(f"{f.name}={_fmt(val)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _env_param_names(env: str) -> set:
    sig = inspect.signature(REGISTRY[env].__init__)
    names = {p for p in sig.parameters if p not in ("self", "kw")}
    return names | {"task_id", "reward_scale", "seed"}


def _check_env_params(env: str, params: dict) -> None:
    allowed = _env_param_names(env) - {"task_id", "reward_scale", "seed"}
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"config: unknown parameter(s) {sorted(unknown)} for env {env!r}; "
                         f"allowed: {sorted(allowed)}")


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _coerce(name: str, typ: str, text: str):
    if typ.startswith("bool"):
        if text.lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"config: {name} expects true/false, got {text!r}")
        return text.lower() in ("true", "1")
    if typ.startswith("int"):
        return int(text)
    if typ.startswith("float"):
        return float(text)
    return text


def parse_config(text: str, **overrides) -> TrainConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment; unknown keys are errors."""
    types = {f.name: str(f.type) for f in fields(TrainConfig)}
    values, env_params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("env."):
            env_params[key[4:]] = _parse_scalar(val)
        elif key in types and key != "env_params":
            try:
                values[key] = _coerce(key, types[key], val)
            except ValueError as exc:
                raise ValueError(f"config line {lineno}: {exc}") from None
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    values["env_params"] = env_params
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def load_config(path, **overrides) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def config_reference() -> str:
    """Every key with its default and meaning, in config-file syntax."""
    out = ["# V-MPO training configuration reference", "# key=default    # meaning"]
    for f in fields(TrainConfig):
        if f.name == "env_params":
            out.append(f"# env.<name>=<value>    # {f.metadata['doc']}")
            for env, cls in sorted(REGISTRY.items()):
                sig = inspect.signature(cls.__init__)
                args = [f"{p.name}={p.default}" for p in sig.parameters.values()
                        if p.name not in ("self", "kw")]
                out.append(f"#   {env}: {', '.join(args) or '(none)'}")
            continue
        if f.default is None:
            out.append(f"# {f.name}=    # {f.metadata['doc']}")
        else:
            out.append(f"{f.name}={_fmt(f.default)}    # {f.metadata['doc']}")
    return "\n".join(out) + "\n"
