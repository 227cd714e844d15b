"""Training losses and regularization terms.

The task terms are mean squared errors over the unroll window; the optional
penalties bound pre-activation magnitude, per-neuron activity averages,
weight magnitude, and action energy/smoothness. All terms are non-negative
and zero exactly when their condition is met.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tensor as T
from .tensor import Tensor


@dataclass
class RegConfig:
    """Penalty weights and their thresholds; zero weights disable a term."""

    lambda_tanh: float = 0.0
    lambda_low: float = 0.0
    lambda_up: float = 0.0
    lambda_l2: float = 0.0
    lambda_action: float = 0.0
    lambda_smooth: float = 0.0
    low_threshold: float = -5.0   # on per-neuron mean membrane potential
    up_threshold: float = 0.3     # on per-neuron mean spike rate
    tanh_bound: float = 3.0

    @property
    def wants_activity(self) -> bool:
        return self.lambda_low > 0.0 or self.lambda_up > 0.0


def sequence_mse(predicted: list[Tensor], observed: list) -> Tensor:
    """Mean squared error over steps, batch, and state dimensions."""
    if len(predicted) != len(observed):
        raise ValueError("sequence length mismatch")
    total = None
    for s_hat, s in zip(predicted, observed):
        step = (s_hat - Tensor(s)).square().mean() if not isinstance(s, Tensor) \
            else (s_hat - s).square().mean()
        total = step if total is None else total + step
    return total * (1.0 / len(predicted))


def activity_reg(mean_activity: Tensor, low: float, up: float):
    """(lower, upper) bound penalties on per-neuron activity means.

    mean_activity has shape (batch, neurons); each penalty sums the squared
    bound violation over neurons and averages over the batch.
    """
    l_low = T.minimum(mean_activity - low, 0.0).square().sum(axis=1).mean()
    l_up = T.maximum(mean_activity - up, 0.0).square().sum(axis=1).mean()
    return l_low, l_up


def activity_penalties(probe: dict, reg: RegConfig) -> tuple[Tensor, Tensor]:
    """Aggregate the probe collected during an unroll into (L_low, L_up).

    The lower bound is applied to mean membrane potentials, the upper bound
    to mean spike rates, both averaged per neuron over every recorded
    sub-step of the window and summed across layers.
    """
    n = len(probe["U"])
    l_low = None
    l_up = None
    n_layers = len(probe["U"][0])
    for layer in range(n_layers):
        u_sum = None
        s_sum = None
        for u_tuple, s_tuple in zip(probe["U"], probe["S"]):
            u_sum = u_tuple[layer] if u_sum is None else u_sum + u_tuple[layer]
            s_sum = s_tuple[layer] if s_sum is None else s_sum + s_tuple[layer]
        u_mean = u_sum * (1.0 / n)
        s_mean = s_sum * (1.0 / n)
        low = T.minimum(u_mean - reg.low_threshold, 0.0).square() \
            .sum(axis=1).mean()
        up = T.maximum(s_mean - reg.up_threshold, 0.0).square() \
            .sum(axis=1).mean()
        l_low = low if l_low is None else l_low + low
        l_up = up if l_up is None else l_up + up
    return l_low, l_up


def l2_penalty(weights: list[Tensor]) -> Tensor:
    """Sum of squared entries over connection weight matrices."""
    total = None
    for w in weights:
        term = w.square().sum()
        total = term if total is None else total + term
    return total


def tanh_penalty(pre_activations: list[Tensor], bound: float = 3.0) -> Tensor:
    """Soft bound on readout membranes feeding the tanh head.

    Each unit pays (|U| - bound)^2 once it leaves [-bound, bound]; the sum
    over units is averaged over batch and steps.
    """
    total = None
    for u in pre_activations:
        term = T.maximum(u.abs() - bound, 0.0).square().sum(axis=1).mean()
        total = term if total is None else total + term
    return total * (1.0 / len(pre_activations))


def action_reg(actions: list[Tensor]) -> tuple[Tensor, Tensor]:
    """(energy, smoothness) penalties on a control sequence.

    energy averages ||u_t||^2 over steps; smoothness averages
    ||u_t - u_{t-1}||^2 over consecutive pairs and needs at least two steps.
    """
    if len(actions) < 2:
        raise ValueError("action smoothness needs a sequence of length >= 2")
    energy = None
    for u in actions:
        term = u.square().sum(axis=1).mean()
        energy = term if energy is None else energy + term
    energy = energy * (1.0 / len(actions))
    smooth = None
    for prev, cur in zip(actions[:-1], actions[1:]):
        term = (cur - prev).square().sum(axis=1).mean()
        smooth = term if smooth is None else smooth + term
    smooth = smooth * (1.0 / (len(actions) - 1))
    return energy, smooth


def prediction_loss(predicted: list[Tensor], observed: list,
                    reg: RegConfig, probe: dict | None = None,
                    weights: list[Tensor] | None = None) -> Tensor:
    """Unroll MSE plus the configured activity and weight penalties."""
    total = sequence_mse(predicted, observed)
    if reg.wants_activity and probe is not None and probe["U"]:
        l_low, l_up = activity_penalties(probe, reg)
        if reg.lambda_low > 0.0:
            total = total + l_low * reg.lambda_low
        if reg.lambda_up > 0.0:
            total = total + l_up * reg.lambda_up
    if reg.lambda_l2 > 0.0 and weights:
        total = total + l2_penalty(weights) * reg.lambda_l2
    return total


def policy_loss(predicted_targets: list[Tensor], targets: list,
                pre_activations: list[Tensor], reg: RegConfig,
                probe: dict | None = None,
                weights: list[Tensor] | None = None,
                actions: list[Tensor] | None = None,
                apply_action_reg: bool = False) -> Tensor:
    """Distance-to-target MSE plus the policy's soft penalties."""
    total = sequence_mse(predicted_targets, targets)
    if reg.lambda_tanh > 0.0 and pre_activations:
        total = total + tanh_penalty(pre_activations, reg.tanh_bound) \
            * reg.lambda_tanh
    if reg.wants_activity and probe is not None and probe["U"]:
        l_low, l_up = activity_penalties(probe, reg)
        if reg.lambda_low > 0.0:
            total = total + l_low * reg.lambda_low
        if reg.lambda_up > 0.0:
            total = total + l_up * reg.lambda_up
    if reg.lambda_l2 > 0.0 and weights:
        total = total + l2_penalty(weights) * reg.lambda_l2
    if apply_action_reg and actions and (reg.lambda_action > 0.0
                                         or reg.lambda_smooth > 0.0):
        energy, smooth = action_reg(actions)
        if reg.lambda_action > 0.0:
            total = total + energy * reg.lambda_action
        if reg.lambda_smooth > 0.0:
            total = total + smooth * reg.lambda_smooth
    return total
