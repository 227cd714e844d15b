"""Planar two-joint reaching task with double-integrator dynamics.

Joint angles are unbounded; actions in [-1, 1] command joint accelerations
scaled by accel_scale, velocities are clamped, and integration is
semi-implicit (velocity first, then position). The observation packs the
joint angles as sine/cosine pairs with the end-effector and target
coordinates, everything already inside [-1, 1] before noise is added and
the vector clamped. State transitions are pure: callers get a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

L1 = 0.5
L2 = 0.4
REACH = L1 + L2


@dataclass(frozen=True)
class EpisodeConfig:
    steps: int = 200
    dt: float = 0.02
    success_threshold: float = 0.05
    obs_noise: float = 0.01
    accel_scale: float = 4.0 * math.pi
    omega_max: float = 2.0 * math.pi

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if self.success_threshold <= 0.0:
            raise ValueError("success threshold must be positive")


@dataclass(frozen=True)
class ArmState:
    theta: np.ndarray   # 2 joint angles, rad
    omega: np.ndarray   # 2 joint velocities, rad/s
    target: np.ndarray  # target end-effector position, au


@dataclass(frozen=True)
class Task:
    """A fixed initial configuration and target position."""

    theta_init: tuple[float, float]
    target: tuple[float, float]


def forward_kinematics(theta) -> np.ndarray:
    """End-effector position; angle 0 points along +x, joint 2 is relative."""
    t1, t2 = float(theta[0]), float(theta[1])
    return np.array([L1 * math.cos(t1) + L2 * math.cos(t1 + t2),
                     L1 * math.sin(t1) + L2 * math.sin(t1 + t2)])


def observe(state: ArmState, cfg: EpisodeConfig,
            rng: np.random.Generator | None = None) -> np.ndarray:
    ee = forward_kinematics(state.theta)
    obs = np.array([math.sin(state.theta[0]), math.cos(state.theta[0]),
                    math.sin(state.theta[1]), math.cos(state.theta[1]),
                    ee[0], ee[1], state.target[0], state.target[1]])
    if rng is not None and cfg.obs_noise > 0.0:
        obs = obs + rng.normal(0.0, cfg.obs_noise, size=8)
    return np.clip(obs, -1.0, 1.0)


def reset(cfg: EpisodeConfig, rng: np.random.Generator,
          task: Task | None = None) -> tuple[ArmState, np.ndarray]:
    """Sample a task (target configuration first, then the initial pose).

    Velocities always start at zero. With a fixed task the reset is
    deterministic up to observation noise.
    """
    if task is None:
        target = forward_kinematics(rng.uniform(-math.pi, math.pi, size=2))
        theta = rng.uniform(-math.pi, math.pi, size=2)
    else:
        target = np.asarray(task.target, dtype=float)
        theta = np.asarray(task.theta_init, dtype=float)
    state = ArmState(theta=theta.copy(), omega=np.zeros(2),
                     target=target.copy())
    return state, observe(state, cfg, rng)


def step(state: ArmState, action, cfg: EpisodeConfig,
         rng: np.random.Generator | None = None):
    """Advance one step; returns (state', observation, info).

    info carries the Euclidean end-effector distance to the target and
    whether it is strictly inside the success threshold.
    """
    action = np.asarray(action, dtype=float)
    if not np.all(np.isfinite(action)):
        raise ValueError("non-finite action")
    action = np.clip(action, -1.0, 1.0)
    omega = np.clip(state.omega + cfg.accel_scale * action * cfg.dt,
                    -cfg.omega_max, cfg.omega_max)
    theta = state.theta + omega * cfg.dt
    new_state = ArmState(theta=theta, omega=omega, target=state.target)
    distance = float(np.linalg.norm(forward_kinematics(theta) - state.target))
    info = {"distance": distance,
            "success": distance < cfg.success_threshold}
    return new_state, observe(new_state, cfg, rng), info


def eval_tasks() -> list[Task]:
    """Eight fixed (initial, target) pairs shared across runs.

    Initial angles cover eight equally spaced joint combinations over
    {0, +-pi/2, pi}; each target is the end-effector position of the same
    configuration with the base joint rotated by pi.
    """
    tasks = []
    for t1 in (0.0, math.pi / 2, math.pi, -math.pi / 2):
        for t2 in (0.0, math.pi / 2):
            target = forward_kinematics((t1 + math.pi, t2))
            tasks.append(Task(theta_init=(t1, t2),
                              target=(float(target[0]), float(target[1]))))
    return tasks


class PlanarArm:
    """Stateful convenience wrapper owning its rng; used for collection."""

    def __init__(self, cfg: EpisodeConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.state: ArmState | None = None

    def reset(self, task: Task | None = None) -> np.ndarray:
        self.state, obs = reset(self.cfg, self.rng, task)
        return obs

    def step(self, action):
        self.state, obs, info = step(self.state, action, self.cfg, self.rng)
        return obs, info
