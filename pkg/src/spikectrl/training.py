"""Offline training of the forward model and the policy.

Each iteration collects fresh episodes with the current policy (optionally
under decaying Gaussian action noise), stores them in the replay buffer,
then updates the forward model for a number of mini-batches (warmup on
recorded data, teacher-forced unroll, backpropagation through time) and the
policy for another set of mini-batches by unrolling its actions through the
frozen forward model. Gradients flow through the whole recorded window,
warmup included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import arm
from .buffer import Episode, ReplayBuffer
from .losses import RegConfig, policy_loss, prediction_loss
from .network import Network
from .optim import Adam, LrSchedule
from .tensor import Tensor, check_finite, concat, no_grad

EE_DIMS = slice(4, 6)  # end-effector coordinates inside the observation


@dataclass
class TrainConfig:
    """Loop sizes, schedules, and penalty weights for one run."""

    iterations: int = 100
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
    lr_prediction: LrSchedule = field(
        default_factory=lambda: LrSchedule(1e-3))
    lr_policy: LrSchedule = field(default_factory=lambda: LrSchedule(1e-3))
    lr_tau: float = 0.01
    reg: RegConfig = field(default_factory=RegConfig)
    action_noise: float = 0.0
    action_noise_decay: float = 1.0
    action_reg_warmup: int = 10
    eval_unroll_horizon: int = 40

    def __post_init__(self):
        if not 0.0 <= self.teacher_forcing <= 1.0:
            raise ValueError("teacher_forcing must lie in [0, 1]")
        if not 0.0 < self.action_noise_decay <= 1.0:
            raise ValueError("action_noise_decay must lie in (0, 1]")
        if self.action_noise < 0.0:
            raise ValueError("action_noise must be non-negative")
        if self.lr_tau < 0.0:
            raise ValueError("lr_tau must be non-negative")
        if min(self.warmup_steps, self.unroll_prediction,
               self.unroll_policy) < 1:
            raise ValueError("warmup and unroll lengths must be >= 1")


def make_optimizer(net: Network) -> Adam:
    return Adam([("main", net.main_parameters()),
                 ("tau", net.tau_parameters())])


def grad_norm(params: list[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def action_noise_at(sigma0: float, decay: float, iteration: int) -> float:
    """Exploration noise scale for a training iteration."""
    return sigma0 * decay ** iteration


def collect_episodes(policy: Network, env_cfg: arm.EpisodeConfig, count: int,
                     sigma_u: float, rng: np.random.Generator,
                     tasks: list[arm.Task] | None = None,
                     record: dict | None = None) -> list[Episode]:
    """Roll out the policy in `count` parallel environments.

    Gaussian noise of scale sigma_u is added to the policy output before
    clamping; the executed action is what gets recorded. Evaluation passes
    sigma_u = 0. Each environment owns a generator seeded from the stream.
    """
    seeds = [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=count)]
    envs = [arm.PlanarArm(env_cfg, np.random.Generator(np.random.PCG64(s)))
            for s in seeds]
    obs = np.stack([env.reset(tasks[i] if tasks is not None else None)
                    for i, env in enumerate(envs)])
    targets = np.stack([env.state.target for env in envs])
    t_steps = env_cfg.steps
    states = np.empty((t_steps + 1, count, obs.shape[1]))
    actions = np.empty((t_steps, count, 2))
    distances = np.empty((t_steps, count))
    states[0] = obs

    policy.reset(count)
    with no_grad():
        for t in range(t_steps):
            u = policy.step(Tensor(np.concatenate([obs, targets], axis=1)),
                            record=record).data
            if sigma_u > 0.0:
                u = u + rng.normal(0.0, sigma_u, size=u.shape)
            u = np.clip(u, -1.0, 1.0)
            for i, env in enumerate(envs):
                obs_i, info = env.step(u[i])
                obs[i] = obs_i
                distances[t, i] = info["distance"]
            actions[t] = u
            states[t + 1] = obs

    episodes = []
    for i in range(count):
        episodes.append(Episode(
            states=states[:, i].copy(),
            actions=actions[:, i].copy(),
            targets=np.tile(targets[i], (t_steps + 1, 1)),
            distances=distances[:, i].copy(),
            seed=seeds[i],
            task_id=i if tasks is not None else -1))
    return episodes


def gather_windows(buffer: ReplayBuffer, idx: np.ndarray, starts: np.ndarray,
                   length: int):
    """Stack (states, actions, targets) windows: time-major, length+1 states."""
    n = len(idx)
    ep0 = buffer[0]
    states = np.empty((length + 1, n, ep0.states.shape[1]))
    actions = np.empty((length, n, ep0.actions.shape[1]))
    targets = np.empty((length + 1, n, ep0.targets.shape[1]))
    for j, (i, s) in enumerate(zip(idx, starts)):
        ep = buffer[int(i)]
        s = int(s)
        states[:, j] = ep.states[s:s + length + 1]
        actions[:, j] = ep.actions[s:s + length]
        targets[:, j] = ep.targets[s:s + length + 1]
    return states, actions, targets


def _sample_starts(rng: np.random.Generator, episode_steps: int, length: int,
                   n: int) -> np.ndarray:
    if length > episode_steps:
        raise ValueError("window longer than episode")
    return rng.integers(0, episode_steps - length + 1, size=n)


def train_prediction(pred: Network, buffer: ReplayBuffer, cfg: TrainConfig,
                     opt: Adam, rng: np.random.Generator, iteration: int,
                     input_log: list | None = None) -> dict:
    """One pass of forward-model updates; returns mean loss and grad norm.

    During warmup the network is driven by recorded states and actions with
    no loss. During the unroll each step independently draws whether the
    input is the recorded state (teacher forcing) or the running estimate;
    the predicted change is added onto whichever state was fed.
    """
    warm, unroll = cfg.warmup_steps, cfg.unroll_prediction
    length = warm + unroll
    lr = cfg.lr_prediction.lr_at(iteration)
    losses, gnorms = [], []
    params = [t for _, t in pred.named_parameters()]
    for _ in range(cfg.batches_prediction):
        idx = buffer.sample_indices(rng, cfg.batch_prediction)
        starts = _sample_starts(rng, buffer[0].steps, length,
                                cfg.batch_prediction)
        tf_mask = rng.random((unroll, cfg.batch_prediction)) \
            < cfg.teacher_forcing
        states, actions, _ = gather_windows(buffer, idx, starts, length)

        opt.zero_grad()
        pred.reset(cfg.batch_prediction,
                   modular=True if cfg.reg.wants_activity else None)
        for t in range(warm):
            pred.step(Tensor(np.concatenate([states[t], actions[t]], axis=1)))

        probe = {"U": [], "S": []} if cfg.reg.wants_activity else None
        s_hat = Tensor(states[warm])
        predicted, observed = [], []
        for k in range(unroll):
            t = warm + k
            if cfg.teacher_forcing >= 1.0:
                state_in = Tensor(states[t])
            elif cfg.teacher_forcing <= 0.0:
                state_in = s_hat
            else:
                m = Tensor(tf_mask[k][:, None].astype(float))
                state_in = Tensor(states[t]) * m + s_hat * (m * (-1.0) + 1.0)
            delta = pred.step(concat([state_in, Tensor(actions[t])], axis=1),
                              probe=probe)
            s_hat = state_in + delta
            predicted.append(s_hat)
            observed.append(states[t + 1])
            if input_log is not None:
                input_log.append({"input": state_in.data.copy(),
                                  "estimate": s_hat.data.copy(),
                                  "truth": states[t].copy()})
        total = prediction_loss(predicted, observed, cfg.reg, probe,
                                pred.weight_tensors())
        check_finite(total, "prediction loss")
        total.backward()
        gn = grad_norm(params)
        check_finite(gn, "prediction gradient norm")
        opt.step({"main": lr, "tau": cfg.lr_tau})
        losses.append(total.item())
        gnorms.append(gn)
    return {"loss": float(np.mean(losses)),
            "grad_norm": float(np.mean(gnorms)), "lr": lr}


def train_policy(policy: Network, pred: Network, buffer: ReplayBuffer,
                 cfg: TrainConfig, opt: Adam, rng: np.random.Generator,
                 iteration: int) -> dict:
    """One pass of policy updates through the frozen forward model.

    Both networks warm up on recorded data; the unroll then closes the loop
    in imagination: the policy acts on the running state estimate and the
    forward model advances it. Only policy parameters receive updates; the
    forward model's parameters and optimizer state are untouched.
    """
    warm, unroll = cfg.warmup_steps, cfg.unroll_policy
    length = warm + unroll
    lr = cfg.lr_policy.lr_at(iteration)
    losses, gnorms = [], []
    params = [t for _, t in policy.named_parameters()]
    pred.set_trainable(False)
    try:
        for _ in range(cfg.batches_policy):
            idx = buffer.sample_indices(rng, cfg.batch_policy)
            starts = _sample_starts(rng, buffer[0].steps, length,
                                    cfg.batch_policy)
            states, actions, targets = gather_windows(buffer, idx, starts,
                                                      length)

            opt.zero_grad()
            policy.reset(cfg.batch_policy,
                         modular=True if cfg.reg.wants_activity else None)
            pred.reset(cfg.batch_policy)
            for t in range(warm):
                policy.step(Tensor(
                    np.concatenate([states[t], targets[t]], axis=1)))
                pred.step(Tensor(
                    np.concatenate([states[t], actions[t]], axis=1)))

            probe = {"U": [], "S": []} if cfg.reg.wants_activity else None
            s_hat = Tensor(states[warm])
            predicted_ee, target_seq = [], []
            pre_acts, act_seq = [], []
            for k in range(unroll):
                t = warm + k
                u_hat = policy.step(concat([s_hat, Tensor(targets[t])],
                                           axis=1), probe=probe)
                pre_acts.append(policy.last_readout)
                act_seq.append(u_hat)
                delta = pred.step(concat([s_hat, u_hat], axis=1))
                s_hat = s_hat + delta
                predicted_ee.append(s_hat[:, EE_DIMS])
                target_seq.append(targets[t + 1])
            total = policy_loss(
                predicted_ee, target_seq, pre_acts, cfg.reg, probe,
                policy.weight_tensors(), act_seq,
                apply_action_reg=iteration >= cfg.action_reg_warmup)
            check_finite(total, "policy loss")
            total.backward()
            gn = grad_norm(params)
            check_finite(gn, "policy gradient norm")
            opt.step({"main": lr, "tau": cfg.lr_tau})
            losses.append(total.item())
            gnorms.append(gn)
    finally:
        pred.set_trainable(True)
    return {"loss": float(np.mean(losses)),
            "grad_norm": float(np.mean(gnorms)), "lr": lr}


def evaluate(policy: Network, pred: Network, env_cfg: arm.EpisodeConfig,
             cfg: TrainConfig, eval_rng: np.random.Generator,
             random_count: int | None = None) -> dict:
    """Run the evaluation tasks without action noise.

    By default this uses the eight fixed configurations; passing
    random_count evaluates that many randomly sampled tasks instead. The
    policy drives the arm while its spikes are recorded; the forward model
    shadows the recorded episodes for its own spike statistics and is then
    scored under an autoregressive rollout. Returns one row of metric
    values.
    """
    from . import metrics as M

    tasks = arm.eval_tasks() if random_count is None else None
    count = len(tasks) if tasks is not None else random_count
    policy_rec = {"hidden1": [], "hidden2": []}
    episodes = collect_episodes(policy, env_cfg, count, 0.0, eval_rng,
                                tasks=tasks, record=policy_rec)
    pred_rec = {"hidden1": [], "hidden2": []}
    states = np.stack([ep.states for ep in episodes], axis=1)
    actions = np.stack([ep.actions for ep in episodes], axis=1)
    with no_grad():
        pred.reset(count)
        for t in range(episodes[0].steps):
            pred.step(Tensor(np.concatenate([states[t], actions[t]],
                                            axis=1)), record=pred_rec)

    per_episode = [M.episode_metrics(ep.distances, env_cfg.success_threshold)
                   for ep in episodes]
    horizon = min(cfg.eval_unroll_horizon,
                  episodes[0].steps - cfg.warmup_steps)
    mse = M.unrolled_mse(pred, episodes, cfg.warmup_steps, horizon)
    records = {f"policy/{k}": np.stack(v) for k, v in policy_rec.items()}
    records.update({f"pred/{k}": np.stack(v) for k, v in pred_rec.items()})
    frac, count, activity = M.spike_stats(records)
    agg = M.aggregate_metrics(per_episode, mse, frac, count, activity)
    return agg.__dict__.copy()


def training_iteration(policy: Network, pred: Network, buffer: ReplayBuffer,
                       cfg: TrainConfig, env_cfg: arm.EpisodeConfig,
                       opt_policy: Adam, opt_pred: Adam,
                       rng: np.random.Generator, iteration: int) -> dict:
    """Collect, then train both networks; returns the iteration's stats."""
    sigma = action_noise_at(cfg.action_noise, cfg.action_noise_decay,
                            iteration)
    episodes = collect_episodes(policy, env_cfg,
                                cfg.episodes_per_iteration, sigma, rng)
    buffer.extend(episodes)
    pred_stats = train_prediction(pred, buffer, cfg, opt_pred, rng, iteration)
    pol_stats = train_policy(policy, pred, buffer, cfg, opt_policy, rng,
                             iteration)
    return {"sigma_u": sigma,
            "pred_loss": pred_stats["loss"],
            "pred_grad_norm": pred_stats["grad_norm"],
            "lr_prediction": pred_stats["lr"],
            "policy_loss": pol_stats["loss"],
            "policy_grad_norm": pol_stats["grad_norm"],
            "lr_policy": pol_stats["lr"]}
