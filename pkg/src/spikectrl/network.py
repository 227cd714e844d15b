"""Two spiking hidden layers plus a leaky-integrator readout.

One forward step holds the continuous input fixed for a number of internal
sub-steps, injecting it as current into the first hidden layer. Populations
update synchronously: every connection carries the spikes emitted on the
previous sub-step. The env-step output is the readout membrane after the
final sub-step, optionally squeezed through tanh for bounded control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .connections import (DenseConnection, LowRankConnection,
                          fluctuation_weight_std)
from .neurons import ALIFCell, LIFCell, NeuronParams, ReadoutCell
from .surrogates import SurrogateConfig
from .tensor import Tensor, check_finite


@dataclass
class NetworkConfig:
    """Shape and initialization of one network.

    rho splits the target membrane variance of a recurrent first layer
    between the feedforward and recurrent pathways; nu is the presumed
    presynaptic rate used by the fluctuation-driven weight scales.
    latent_dim factors every spike-carrying connection through a rank-d
    bottleneck (None keeps them dense). The bounded head never allows
    recurrence.
    """

    input_size: int
    hidden_size: int
    output_size: int
    neuron: str = "alif"
    recurrent: bool = False
    head: str = "delta"
    params: NeuronParams = field(default_factory=NeuronParams)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    sub_steps: int = 7
    dt_env: float = 0.02
    rho: float = 0.9
    nu: float = 125.0
    mu_u: float = 0.0
    sigma_u: float = 1.0
    latent_dim: int | None = None
    readout_scale: float = 1.0
    smooth: bool = False

    def __post_init__(self):
        if self.neuron not in ("lif", "alif"):
            raise ValueError(f"unknown neuron kind {self.neuron!r}")
        if self.head not in ("tanh", "delta"):
            raise ValueError(f"unknown output head {self.head!r}")
        if self.head == "tanh" and self.recurrent:
            raise ValueError("the bounded control head does not use recurrence")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.sub_steps < 1:
            raise ValueError("sub_steps must be >= 1")

    @property
    def dt_snn(self) -> float:
        return self.dt_env / self.sub_steps


class Network:
    """Instantiated parameters and state for one network."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg = cfg
        dt = cfg.dt_snn
        p = cfg.params
        cell_cls = ALIFCell if cfg.neuron == "alif" else LIFCell
        self.cell1 = cell_cls(cfg.hidden_size, p, dt, cfg.surrogate, cfg.smooth)
        self.cell2 = cell_cls(cfg.hidden_size, p, dt, cfg.surrogate, cfg.smooth)
        self.readout = ReadoutCell(cfg.output_size, p, dt)

        def std(fan_in, target):
            return fluctuation_weight_std(fan_in, cfg.nu, p.tau_mem,
                                          p.tau_syn, dt, target)

        def spiking_conn(n_in, n_out, weight_std, scale=1.0):
            if cfg.latent_dim is None:
                return DenseConnection(n_in, n_out, weight_std, rng, scale)
            return LowRankConnection(n_in, n_out, cfg.latent_dim, weight_std,
                                     rng, scale)

        ff_target = cfg.sigma_u * (cfg.rho ** 0.5 if cfg.recurrent else 1.0)
        self.conn_in = DenseConnection(
            cfg.input_size, cfg.hidden_size, std(cfg.input_size, ff_target),
            rng)
        self.conn_rec = None
        if cfg.recurrent:
            rec_target = cfg.sigma_u * (1.0 - cfg.rho) ** 0.5
            self.conn_rec = spiking_conn(
                cfg.hidden_size, cfg.hidden_size,
                std(cfg.hidden_size, rec_target))
        self.conn_h = spiking_conn(cfg.hidden_size, cfg.hidden_size,
                                   std(cfg.hidden_size, cfg.sigma_u))
        self.conn_out = spiking_conn(cfg.hidden_size, cfg.output_size,
                                     std(cfg.hidden_size, cfg.sigma_u),
                                     scale=cfg.readout_scale)

        self._state1 = self._state2 = self._state3 = None
        self._decays = None
        self._modular = True
        self._plan = None
        self._fused_state = None
        self._fused_prev = None
        self.last_readout: Tensor | None = None

    # -- parameter access -------------------------------------------------

    def _connections(self) -> list[tuple[str, object]]:
        conns = [("in", self.conn_in)]
        if self.conn_rec is not None:
            conns.append(("rec", self.conn_rec))
        conns += [("h", self.conn_h), ("out", self.conn_out)]
        return conns

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for cname, conn in self._connections():
            out += [(f"{cname}.{n}", t) for n, t in conn.named_parameters()]
        for cname, cell in (("cell1", self.cell1), ("cell2", self.cell2),
                            ("readout", self.readout)):
            out += [(f"{cname}.{n}", t) for n, t in cell.named_parameters()]
        return out

    def main_parameters(self) -> list[Tensor]:
        """Connection weights, biases, and scales (everything but taus)."""
        out = []
        for _, conn in self._connections():
            out += [t for _, t in conn.named_parameters()]
        return out

    def tau_parameters(self) -> list[Tensor]:
        return (self.cell1.tau_parameters() + self.cell2.tau_parameters()
                + self.readout.tau_parameters())

    def weight_tensors(self) -> list[Tensor]:
        """Connection weight matrices only, for the L2 penalty."""
        out = []
        for _, conn in self._connections():
            out += conn.weight_tensors()
        return out

    def set_trainable(self, flag: bool) -> None:
        for t in self.main_parameters():
            t.requires_grad = flag
        learn = flag and self.cfg.params.learnable_tau
        for t in self.tau_parameters():
            t.requires_grad = learn

    def param_count(self) -> int:
        return sum(conn.param_count() for _, conn in self._connections())

    # -- dynamics ----------------------------------------------------------

    def reset(self, batch: int, modular: bool | None = None) -> None:
        """Fresh hidden state for a new episode or training window.

        The decay factors are rebuilt here so gradients for the current tau
        values flow once per window. The mode is fixed per window: the fused
        fast path by default, or the modular cell path when requested or
        when the configuration requires it (smooth test mode, baseline
        threshold floor).
        """
        from .fastpath import WindowPlan

        if modular is None:
            modular = (self.cfg.smooth
                       or self.cfg.params.baseline_floor is not None)
        self._modular = modular
        self._state1 = self._state2 = self._state3 = None
        self._plan = None
        self._fused_state = None
        self._fused_prev = None
        if modular:
            self._state1 = self.cell1.reset(batch)
            self._state2 = self.cell2.reset(batch)
            self._state3 = self.readout.reset(batch)
            self._decays = (self.cell1.decays(), self.cell2.decays(),
                            self.readout.decays())
        else:
            self._plan = WindowPlan(self)
            self._fused_state = self._plan.initial_state(
                batch, self.conn_in.w.data.dtype)

    def step(self, x: Tensor, record: dict | None = None,
             probe: dict | None = None) -> Tensor:
        """One environment step: sub_steps internal updates under held input.

        record, when a dict of lists, receives per-sub-step spike arrays
        for both hidden layers; probe receives the graph tensors of hidden
        membranes and spikes for activity regularization (modular mode
        only).
        """
        if not self._modular:
            from .fastpath import step_fused

            if probe is not None:
                raise RuntimeError(
                    "activity probes need the modular path; call "
                    "reset(batch, modular=True)")
            u_out = step_fused(self, x, record)
            check_finite(u_out, "readout membrane")
            self.last_readout = u_out
            return u_out.tanh() if self.cfg.head == "tanh" else u_out
        if self._state1 is None:
            raise RuntimeError("network state not initialized; call reset()")
        dec1, dec2, dec3 = self._decays
        i_inj = self.conn_in.apply(x)
        u_out = None
        for _ in range(self.cfg.sub_steps):
            s1_prev = self._state1.S
            s2_prev = self._state2.S
            drive1 = i_inj
            if self.conn_rec is not None:
                drive1 = drive1 + self.conn_rec.apply(s1_prev)
            self._state1, s1 = self.cell1.step(self._state1, drive1, dec1)
            self._state2, s2 = self.cell2.step(
                self._state2, self.conn_h.apply(s1_prev), dec2)
            self._state3, u_out = self.readout.step(
                self._state3, self.conn_out.apply(s2_prev), dec3)
            if record is not None:
                record["hidden1"].append(s1.data.copy())
                record["hidden2"].append(s2.data.copy())
            if probe is not None:
                probe["U"].append((self._state1.U, self._state2.U))
                probe["S"].append((s1, s2))
        check_finite(u_out, "readout membrane")
        self.last_readout = u_out
        if self.cfg.head == "tanh":
            return u_out.tanh()
        return u_out
