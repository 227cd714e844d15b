"""Task performance metrics and their CSV serialization.

Everything here is a pure function of recorded trajectories and spike
records. The sentinel for time-to-target when the target is never reached
is T + 1; failed episodes are excluded from the time-to-target mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, concat, no_grad

METRIC_COLUMNS = [
    "iteration", "lr_prediction", "lr_policy", "sigma_u",
    "pred_loss", "pred_grad_norm", "policy_loss", "policy_grad_norm",
    "mean_cumulative_distance", "median_cumulative_distance",
    "success_rate", "time_to_target_mean",
    "time_on_target_mean", "time_on_target_median",
    "unrolled_state_mse", "active_neuron_fraction", "active_neuron_count",
    "mean_spike_activity",
]


@dataclass
class EpisodeMetrics:
    mean_cumulative_distance: float
    success: bool
    time_to_target: int   # 1-based step count; T + 1 when never reached
    time_on_target: int


@dataclass
class AggregateMetrics:
    mean_cumulative_distance: float
    median_cumulative_distance: float
    success_rate: float
    time_to_target_mean: float
    time_on_target_mean: float
    time_on_target_median: float
    unrolled_state_mse: float
    active_neuron_fraction: float
    active_neuron_count: float
    mean_spike_activity: float


def episode_metrics(distances, threshold: float) -> EpisodeMetrics:
    """Per-episode task metrics from the per-step target distances."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise ValueError("empty distance trace")
    below = d < threshold
    success = bool(below.any())
    time_to_target = int(np.argmax(below)) + 1 if success else len(d) + 1
    return EpisodeMetrics(
        mean_cumulative_distance=float(d.mean()),
        success=success,
        time_to_target=time_to_target,
        time_on_target=int(below.sum()))


def spike_stats(records: dict[str, np.ndarray]) -> tuple[float, float, float]:
    """(active fraction, active count, mean activity) over layer records.

    Each record is a binary array (time, batch, width). The active fraction
    averages, over layers and episodes, the share of neurons that spike at
    least once; the active count is the same average without normalizing by
    width; mean activity pools spike events over every neuron-step.
    """
    fractions, counts = [], []
    events = 0.0
    slots = 0
    for rec in records.values():
        rec = np.asarray(rec)
        spiked = rec.any(axis=0)          # (batch, width)
        fractions.append(spiked.mean())
        counts.append(spiked.sum(axis=1).mean())
        events += rec.sum()
        slots += rec.size
    if not slots:
        return 0.0, 0.0, 0.0
    return (float(np.mean(fractions)), float(np.mean(counts)),
            float(events / slots))


def unrolled_mse(pred, episodes, warmup: int, horizon: int) -> float:
    """Forward-model MSE under a fully autoregressive rollout.

    The model warms up on recorded states and actions, then advances its
    own state estimate with the recorded actions for `horizon` steps; no
    teacher forcing is applied. Episodes must be long enough for
    warmup + horizon steps.
    """
    steps = episodes[0].steps
    if warmup + horizon > steps:
        raise ValueError("horizon exceeds episode length")
    states = np.stack([ep.states for ep in episodes], axis=1)
    actions = np.stack([ep.actions for ep in episodes], axis=1)
    n = states.shape[1]
    with no_grad():
        pred.reset(n)
        for t in range(warmup):
            pred.step(Tensor(np.concatenate([states[t], actions[t]],
                                            axis=1)))
        s_hat = Tensor(states[warmup])
        err = 0.0
        for k in range(horizon):
            t = warmup + k
            delta = pred.step(concat([s_hat, Tensor(actions[t])], axis=1))
            s_hat = s_hat + delta
            err += float(np.mean((s_hat.data - states[t + 1]) ** 2))
    return err / horizon


def aggregate_metrics(per_episode: list[EpisodeMetrics], mse: float,
                      active_fraction: float, active_count: float,
                      activity: float) -> AggregateMetrics:
    dist = np.array([m.mean_cumulative_distance for m in per_episode])
    on_target = np.array([m.time_on_target for m in per_episode], dtype=float)
    successes = [m.time_to_target for m in per_episode if m.success]
    # failures carry the T + 1 sentinel and stay out of the mean; with no
    # successes at all the sentinel itself is reported
    ttt = float(np.mean(successes)) if successes else float(
        max(m.time_to_target for m in per_episode))
    return AggregateMetrics(
        mean_cumulative_distance=float(dist.mean()),
        median_cumulative_distance=float(np.median(dist)),
        success_rate=float(np.mean([m.success for m in per_episode])),
        time_to_target_mean=ttt,
        time_on_target_mean=float(on_target.mean()),
        time_on_target_median=float(np.median(on_target)),
        unrolled_state_mse=mse,
        active_neuron_fraction=active_fraction,
        active_neuron_count=active_count,
        mean_spike_activity=activity)


def format_value(column: str, value) -> str:
    if column == "iteration":
        return str(int(value))
    return format(float(value), ".17e")


def write_csv(rows: list[dict], path) -> None:
    """Fixed column order, UTF-8, '.' decimals, exact float round-trip."""
    lines = [",".join(METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(format_value(c, row.get(c, float("nan")))
                              for c in METRIC_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for col, val in zip(header, vals):
            row[col] = int(val) if col == "iteration" else float(val)
        rows.append(row)
    return rows
