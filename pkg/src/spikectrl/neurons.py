"""Discrete-time spiking neuron dynamics.

All cells share the same two-variable update: the synaptic current decays
with beta_syn and collects the weighted input, the membrane decays with
beta_mem and integrates the current, and spiking cells then threshold the
pre-reset membrane and apply a subtractive reset. The adaptive variant adds
a spike-triggered threshold trace and a linearly decaying baseline that lets
silent neurons become excitable again.

Time constants are stored in log space (tau = exp(tau')) so they stay
positive under gradient updates; decay factors are beta = exp(-dt / tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .surrogates import SurrogateConfig, spike
from .tensor import Tensor, check_finite, maximum


@dataclass
class NeuronParams:
    """Static per-layer neuron constants.

    delta_theta is a baseline threshold decay rate in threshold units per
    second; it is applied as delta_theta * dt per sub-step. The membrane
    resistance is fixed at 1 and absorbed by the (1 - beta_mem) factor of
    the membrane update; it is kept here for documentation only.
    """

    tau_mem: float = 0.01
    tau_syn: float = 0.002
    tau_ada: float = 0.1
    theta0: float = 1.0
    u_rest: float = 0.0
    r_mem: float = 1.0
    delta_theta: float = 0.0
    xi_theta: float = 0.0
    learnable_tau: bool = False
    baseline_floor: float | None = None

    def __post_init__(self):
        if min(self.tau_mem, self.tau_syn, self.tau_ada) <= 0.0:
            raise ValueError("time constants must be positive")
        if self.theta0 <= 0.0:
            raise ValueError("theta0 must be positive")
        if self.xi_theta < 0.0:
            raise ValueError("xi_theta must be non-negative")


@dataclass
class LayerState:
    """Dynamic per-neuron state; spiking entries are exactly 0 or 1."""

    I: Tensor
    U: Tensor
    S: Tensor | None = None
    theta_b: Tensor | None = None
    theta_a: Tensor | None = None


def reparam_tau(tau_log: Tensor) -> Tensor:
    """Map an unconstrained log parameter to a strictly positive tau."""
    return tau_log.exp()


def decay_factor(tau_log: Tensor, dt: float) -> Tensor:
    """beta = exp(-dt / tau) for tau = exp(tau_log); always in (0, 1)."""
    return ((-tau_log).exp() * (-dt)).exp()


class ReadoutCell:
    """Non-spiking leaky integrator; its membrane is the layer output."""

    def __init__(self, width: int, params: NeuronParams, dt: float):
        self.width = width
        self.params = params
        self.dt = dt
        self.tau_mem_log = Tensor(
            np.full(width, math.log(params.tau_mem)),
            requires_grad=params.learnable_tau)
        self.tau_syn_log = Tensor(
            np.full(width, math.log(params.tau_syn)),
            requires_grad=params.learnable_tau)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [("tau_mem_log", self.tau_mem_log),
                ("tau_syn_log", self.tau_syn_log)]

    def tau_parameters(self) -> list[Tensor]:
        return [self.tau_mem_log, self.tau_syn_log]

    def decays(self) -> tuple[Tensor, Tensor]:
        """(beta_mem, beta_syn) for the current tau values."""
        return (decay_factor(self.tau_mem_log, self.dt),
                decay_factor(self.tau_syn_log, self.dt))

    def reset(self, batch: int) -> LayerState:
        z = np.zeros((batch, self.width))
        return LayerState(I=Tensor(z),
                          U=Tensor(np.full_like(z, self.params.u_rest)))

    def step(self, state: LayerState, drive: Tensor,
             decays: tuple[Tensor, Tensor]) -> tuple[LayerState, Tensor]:
        beta_mem, beta_syn = decays
        i_new = state.I * beta_syn + drive
        u_new = state.U * beta_mem + i_new * (1.0 - beta_mem)
        return LayerState(I=i_new, U=u_new), u_new


class LIFCell(ReadoutCell):
    """Leaky integrate-and-fire layer with subtractive reset."""

    def __init__(self, width: int, params: NeuronParams, dt: float,
                 surrogate: SurrogateConfig, smooth: bool = False):
        super().__init__(width, params, dt)
        self.surrogate = surrogate
        self.smooth = smooth

    def reset(self, batch: int) -> LayerState:
        z = np.zeros((batch, self.width))
        return LayerState(I=Tensor(z),
                          U=Tensor(np.full_like(z, self.params.u_rest)),
                          S=Tensor(z))

    def _fire(self, u_pre_minus_theta: Tensor) -> Tensor:
        if self.smooth:
            return (u_pre_minus_theta * self.surrogate.beta).sigmoid()
        return spike(u_pre_minus_theta, self.surrogate)

    def step(self, state: LayerState, drive: Tensor,
             decays: tuple[Tensor, Tensor]) -> tuple[LayerState, Tensor]:
        beta_mem, beta_syn = decays
        i_new = state.I * beta_syn + drive
        u_pre = state.U * beta_mem + i_new * (1.0 - beta_mem)
        s_new = self._fire(u_pre - self.params.theta0)
        u_new = u_pre - s_new * self.params.theta0
        return LayerState(I=i_new, U=u_new, S=s_new), s_new


class ALIFCell(LIFCell):
    """LIF with an adaptive threshold.

    The effective threshold at step t is theta_b + xi * theta_a using the
    traces from the end of the previous step. After the spike decision the
    baseline drifts down by delta_theta * dt (snapping back to theta0 on a
    spike) and the adaptation trace decays with beta_ada and accumulates
    the spike. With xi = 0 and delta_theta = 0 the dynamics reduce exactly
    to the plain LIF cell.
    """

    def __init__(self, width: int, params: NeuronParams, dt: float,
                 surrogate: SurrogateConfig, smooth: bool = False):
        super().__init__(width, params, dt, surrogate, smooth)
        self.tau_ada_log = Tensor(
            np.full(width, math.log(params.tau_ada)),
            requires_grad=params.learnable_tau)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return super().named_parameters() + [("tau_ada_log", self.tau_ada_log)]

    def tau_parameters(self) -> list[Tensor]:
        return super().tau_parameters() + [self.tau_ada_log]

    def decays(self) -> tuple[Tensor, Tensor, Tensor]:
        beta_mem, beta_syn = super().decays()
        return beta_mem, beta_syn, decay_factor(self.tau_ada_log, self.dt)

    def reset(self, batch: int) -> LayerState:
        z = np.zeros((batch, self.width))
        return LayerState(I=Tensor(z),
                          U=Tensor(np.full_like(z, self.params.u_rest)),
                          S=Tensor(z),
                          theta_b=Tensor(np.full_like(z, self.params.theta0)),
                          theta_a=Tensor(z))

    def step(self, state: LayerState, drive: Tensor,
             decays) -> tuple[LayerState, Tensor]:
        beta_mem, beta_syn, beta_ada = decays
        p = self.params
        theta = state.theta_b + state.theta_a * p.xi_theta
        i_new = state.I * beta_syn + drive
        u_pre = state.U * beta_mem + i_new * (1.0 - beta_mem)
        s_new = self._fire(u_pre - theta)
        u_new = u_pre - s_new * theta
        theta_b = (state.theta_b - p.delta_theta * self.dt
                   + (-state.theta_b + p.theta0) * s_new)
        if p.baseline_floor is not None:
            theta_b = maximum(theta_b, p.baseline_floor)
        theta_a = state.theta_a * beta_ada + s_new
        return (LayerState(I=i_new, U=u_new, S=s_new,
                           theta_b=theta_b, theta_a=theta_a), s_new)


# -- single-step functional forms used in tests and demos ---------------------

def _scalar_decays(params: NeuronParams, dt: float):
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return (math.exp(-dt / params.tau_mem), math.exp(-dt / params.tau_syn),
            math.exp(-dt / params.tau_ada))


def lif_step(state: LayerState, weighted_spikes: Tensor, i_inj: Tensor,
             params: NeuronParams, dt: float,
             surrogate: SurrogateConfig | None = None):
    """One LIF update from explicit inputs; returns (new state, spikes)."""
    check_finite(state.I, "lif_step state I")
    check_finite(state.U, "lif_step state U")
    beta_mem, beta_syn, _ = _scalar_decays(params, dt)
    surrogate = surrogate or SurrogateConfig()
    i_new = state.I * beta_syn + weighted_spikes + i_inj
    u_pre = state.U * beta_mem + i_new * (1.0 - beta_mem)
    s_new = spike(u_pre - params.theta0, surrogate)
    u_new = u_pre - s_new * params.theta0
    return LayerState(I=i_new, U=u_new, S=s_new), s_new


def alif_step(state: LayerState, weighted_spikes: Tensor, i_inj: Tensor,
              params: NeuronParams, dt: float,
              surrogate: SurrogateConfig | None = None):
    """One adaptive-threshold update; returns (new state, spikes)."""
    check_finite(state.I, "alif_step state I")
    check_finite(state.U, "alif_step state U")
    beta_mem, beta_syn, beta_ada = _scalar_decays(params, dt)
    surrogate = surrogate or SurrogateConfig()
    theta = state.theta_b + state.theta_a * params.xi_theta
    i_new = state.I * beta_syn + weighted_spikes + i_inj
    u_pre = state.U * beta_mem + i_new * (1.0 - beta_mem)
    s_new = spike(u_pre - theta, surrogate)
    u_new = u_pre - s_new * theta
    theta_b = (state.theta_b - params.delta_theta * dt
               + (-state.theta_b + params.theta0) * s_new)
    if params.baseline_floor is not None:
        theta_b = maximum(theta_b, params.baseline_floor)
    theta_a = state.theta_a * beta_ada + s_new
    return (LayerState(I=i_new, U=u_new, S=s_new,
                       theta_b=theta_b, theta_a=theta_a), s_new)


def readout_step(state: LayerState, weighted_spikes: Tensor,
                 params: NeuronParams, dt: float):
    """One non-spiking integrator update; returns (new state, membrane)."""
    check_finite(state.I, "readout_step state I")
    check_finite(state.U, "readout_step state U")
    beta_mem, beta_syn, _ = _scalar_decays(params, dt)
    i_new = state.I * beta_syn + weighted_spikes
    u_new = state.U * beta_mem + i_new * (1.0 - beta_mem)
    return LayerState(I=i_new, U=u_new), u_new
