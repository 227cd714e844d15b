"""Run configuration: defaults, plain-text parsing, and validation.

Config files are `key = value` lines; blank lines and `#` comments are
ignored. Unknown keys, malformed lines, and out-of-range values raise with
the offending key and line number. Omitted keys keep their defaults, which
reproduce the final published hyperparameter set. Command-line flags mirror
the same keys and override file values.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .arm import EpisodeConfig
from .losses import RegConfig
from .network import NetworkConfig
from .neurons import NeuronParams
from .optim import LrSchedule
from .surrogates import SurrogateConfig
from .training import TrainConfig

OBS_SIZE = 8
ACTION_SIZE = 2
TARGET_SIZE = 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # run
    seed: int = 0
    precision: str = "float64"
    iterations: int = 100
    checkpoint_every: int = 10
    # collection and training loop
    episodes_per_iteration: int = 64
    buffer_capacity: int = 6400
    batches_prediction: int = 25
    batches_policy: int = 25
    batch_prediction: int = 256
    batch_policy: int = 256
    warmup_steps: int = 10
    unroll_prediction: int = 10
    unroll_policy: int = 40
    teacher_forcing: float = 1.0
    eval_unroll_horizon: int = 40
    # optimization
    lr_prediction: float = 1e-3
    lr_policy: float = 1e-3
    lr_tau: float = 0.01
    lr_decay: float = 1.0
    lr_min: float = 1e-4
    # neuron model
    neuron: str = "alif"
    tau_mem: float = 0.01
    tau_syn: float = 0.002
    tau_ada: float = 0.1
    learn_tau: bool = True
    theta0: float = 1.0
    u_rest: float = 0.0
    alif_decay: float = 10.0
    alif_adapt_scale: float = 0.1
    baseline_floor: float | None = None
    # surrogate gradient
    surrogate: str = "gaussian"
    surrogate_beta: float = 16.0
    surrogate_gamma: float = 1.0
    # architecture
    hidden_size: int = 512
    latent_dim: int | None = None
    rho: float = 0.9
    nu: float = 125.0
    sub_steps: int = 7
    prediction_recurrent: bool = True
    prediction_readout_scale: float = 0.005
    # environment
    episode_steps: int = 200
    dt_env: float = 0.02
    success_threshold: float = 0.05
    obs_noise: float = 0.01
    accel_scale: float = 4.0 * math.pi
    omega_max: float = 2.0 * math.pi
    # regularization
    lambda_tanh: float = 0.0
    lambda_low: float = 0.0
    lambda_up: float = 0.0
    lambda_l2: float = 0.0
    lambda_action: float = 0.0
    lambda_smooth: float = 0.0
    activity_low_threshold: float = -5.0
    activity_up_threshold: float = 0.3
    action_reg_warmup: int = 10
    # exploration noise
    action_noise: float = 0.0
    action_noise_decay: float = 1.0

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        def require(ok: bool, key: str, why: str):
            if not ok:
                raise ConfigError(f"{key}: {why} (got {getattr(self, key)!r})")

        require(self.precision in ("float64", "float32"), "precision",
                "must be float64 or float32")
        require(self.neuron in ("lif", "alif"), "neuron",
                "must be lif or alif")
        require(self.surrogate in ("gaussian", "sigmoid", "superspike"),
                "surrogate", "must be gaussian, sigmoid, or superspike")
        for key in ("tau_mem", "tau_syn", "tau_ada"):
            require(getattr(self, key) > 0.0, key, "must be positive")
        for key in ("lr_prediction", "lr_policy", "lr_min", "theta0",
                    "surrogate_beta", "surrogate_gamma", "nu", "dt_env",
                    "success_threshold", "accel_scale", "omega_max"):
            require(getattr(self, key) > 0.0, key, "must be positive")
        for key in ("lr_tau", "lambda_tanh", "lambda_low", "lambda_up",
                    "lambda_l2", "lambda_action", "lambda_smooth",
                    "action_noise", "obs_noise", "alif_adapt_scale"):
            require(getattr(self, key) >= 0.0, key, "must be non-negative")
        require(0.0 < self.lr_decay <= 1.0, "lr_decay", "must be in (0, 1]")
        require(self.lr_min <= self.lr_prediction, "lr_min",
                "must not exceed lr_prediction")
        require(self.lr_min <= self.lr_policy, "lr_min",
                "must not exceed lr_policy")
        require(0.0 <= self.teacher_forcing <= 1.0, "teacher_forcing",
                "must be in [0, 1]")
        require(0.0 < self.action_noise_decay <= 1.0, "action_noise_decay",
                "must be in (0, 1]")
        require(0.0 <= self.rho <= 1.0, "rho", "must be in [0, 1]")
        for key in ("iterations", "action_reg_warmup"):
            require(getattr(self, key) >= 0, key, "must be >= 0")
        for key in ("checkpoint_every", "episodes_per_iteration",
                    "buffer_capacity", "batches_prediction", "batches_policy",
                    "batch_prediction", "batch_policy", "warmup_steps",
                    "unroll_prediction", "unroll_policy", "hidden_size",
                    "sub_steps", "episode_steps", "eval_unroll_horizon"):
            require(getattr(self, key) >= 1, key, "must be >= 1")
        require(self.latent_dim is None or self.latent_dim >= 1, "latent_dim",
                "must be 'full' or >= 1")
        require(self.warmup_steps + self.unroll_prediction
                <= self.episode_steps, "unroll_prediction",
                "warmup_steps + unroll_prediction must not exceed "
                "episode_steps")
        require(self.warmup_steps + self.unroll_policy <= self.episode_steps,
                "unroll_policy",
                "warmup_steps + unroll_policy must not exceed episode_steps")
        require(self.warmup_steps + self.eval_unroll_horizon
                <= self.episode_steps, "eval_unroll_horizon",
                "warmup_steps + eval_unroll_horizon must not exceed "
                "episode_steps")

    # -- derived structures -------------------------------------------------

    def neuron_params(self) -> NeuronParams:
        return NeuronParams(
            tau_mem=self.tau_mem, tau_syn=self.tau_syn, tau_ada=self.tau_ada,
            theta0=self.theta0, u_rest=self.u_rest,
            delta_theta=self.alif_decay if self.neuron == "alif" else 0.0,
            xi_theta=self.alif_adapt_scale if self.neuron == "alif" else 0.0,
            learnable_tau=self.learn_tau,
            baseline_floor=self.baseline_floor)

    def surrogate_config(self) -> SurrogateConfig:
        return SurrogateConfig(kind=self.surrogate, beta=self.surrogate_beta,
                               gamma=self.surrogate_gamma)

    def episode_config(self) -> EpisodeConfig:
        return EpisodeConfig(
            steps=self.episode_steps, dt=self.dt_env,
            success_threshold=self.success_threshold,
            obs_noise=self.obs_noise, accel_scale=self.accel_scale,
            omega_max=self.omega_max)

    def reg_config(self) -> RegConfig:
        return RegConfig(
            lambda_tanh=self.lambda_tanh, lambda_low=self.lambda_low,
            lambda_up=self.lambda_up, lambda_l2=self.lambda_l2,
            lambda_action=self.lambda_action,
            lambda_smooth=self.lambda_smooth,
            low_threshold=self.activity_low_threshold,
            up_threshold=self.activity_up_threshold)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            episodes_per_iteration=self.episodes_per_iteration,
            buffer_capacity=self.buffer_capacity,
            batches_prediction=self.batches_prediction,
            batches_policy=self.batches_policy,
            batch_prediction=self.batch_prediction,
            batch_policy=self.batch_policy,
            warmup_steps=self.warmup_steps,
            unroll_prediction=self.unroll_prediction,
            unroll_policy=self.unroll_policy,
            teacher_forcing=self.teacher_forcing,
            lr_prediction=LrSchedule(self.lr_prediction, self.lr_decay,
                                     self.lr_min),
            lr_policy=LrSchedule(self.lr_policy, self.lr_decay, self.lr_min),
            lr_tau=self.lr_tau,
            reg=self.reg_config(),
            action_noise=self.action_noise,
            action_noise_decay=self.action_noise_decay,
            action_reg_warmup=self.action_reg_warmup,
            eval_unroll_horizon=self.eval_unroll_horizon)

    def prediction_network_config(self, smooth: bool = False) -> NetworkConfig:
        return NetworkConfig(
            input_size=OBS_SIZE + ACTION_SIZE, hidden_size=self.hidden_size,
            output_size=OBS_SIZE, neuron=self.neuron,
            recurrent=self.prediction_recurrent, head="delta",
            params=self.neuron_params(), surrogate=self.surrogate_config(),
            sub_steps=self.sub_steps, dt_env=self.dt_env, rho=self.rho,
            nu=self.nu, latent_dim=self.latent_dim,
            readout_scale=self.prediction_readout_scale, smooth=smooth)

    def policy_network_config(self, smooth: bool = False) -> NetworkConfig:
        return NetworkConfig(
            input_size=OBS_SIZE + TARGET_SIZE, hidden_size=self.hidden_size,
            output_size=ACTION_SIZE, neuron=self.neuron, recurrent=False,
            head="tanh", params=self.neuron_params(),
            surrogate=self.surrogate_config(), sub_steps=self.sub_steps,
            dt_env=self.dt_env, rho=self.rho, nu=self.nu,
            latent_dim=self.latent_dim, readout_scale=1.0, smooth=smooth)

    # -- serialization ------------------------------------------------------

    def to_items(self) -> list[tuple[str, str]]:
        out = []
        for f in dataclasses.fields(self):
            out.append((f.name, _format_value(f.name, getattr(self, f.name))))
        return out


_SPECIAL_NONE = {"latent_dim": "full", "baseline_floor": "none"}


def _format_value(key: str, value) -> str:
    if key in _SPECIAL_NONE and value is None:
        return _SPECIAL_NONE[key]
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(key: str, raw: str, where: str):
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if key not in fields:
        raise ConfigError(f"{where}: unknown key {key!r}")
    raw = raw.strip()
    if key in _SPECIAL_NONE:
        if raw == _SPECIAL_NONE[key]:
            return None
        try:
            return int(raw) if key == "latent_dim" else float(raw)
        except ValueError:
            raise ConfigError(
                f"{where}: invalid value for {key}: {raw!r}") from None
    default = fields[key].default
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"{where}: invalid value for {key}: {raw!r}") from None


def parse_config(path: str | None = None,
                 overrides: dict[str, str] | None = None) -> RunConfig:
    """Build a validated RunConfig from a file and/or override strings."""
    values: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(
                        f"{path}:{lineno}: malformed line {line.strip()!r}")
                key, raw = stripped.split("=", 1)
                key = key.strip()
                values[key] = _parse_value(key, raw, f"{path}:{lineno}")
    for key, raw in (overrides or {}).items():
        values[key] = _parse_value(key, raw, f"flag --{key}")
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
