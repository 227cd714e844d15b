"""Linear connections between populations and their initialization.

Weights are drawn zero-mean with a standard deviation chosen from the
postsynaptic membrane kernel so that, under independent presynaptic spiking
at a presumed rate, the stationary free membrane potential hits the target
mean and standard deviation. A connection can be dense or factored through
a low-rank bottleneck (no nonlinearity between the two stages, bias on the
second stage only). Every connection carries a learnable scalar output
scale, used to shrink the prediction readout at initialization.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor


def psp_kernel_sums(beta_mem: float, beta_syn: float) -> tuple[float, float]:
    """(sum of the unit PSP kernel, sum of its squares).

    The kernel is the membrane response to a single unit-weight input spike
    under the discrete two-variable update, e_m for m >= 0 steps after
    arrival. Both sums have closed forms, with a separate branch for the
    equal-decay limit.
    """
    bm, bs = float(beta_mem), float(beta_syn)
    if not (0.0 < bm < 1.0 and 0.0 < bs < 1.0):
        raise ValueError("decay factors must lie in (0, 1)")
    kernel_sum = 1.0 / (1.0 - bs)
    if abs(bm - bs) < 1e-12:
        b = bm
        sq = (1.0 - b) ** 2 * (1.0 + b * b) / (1.0 - b * b) ** 3
    else:
        pref = (1.0 - bm) ** 2 / (bm - bs) ** 2
        sq = pref * (bm * bm / (1.0 - bm * bm)
                     + bs * bs / (1.0 - bs * bs)
                     - 2.0 * bm * bs / (1.0 - bm * bs))
    return kernel_sum, sq


def fluctuation_weight_std(fan_in: int, rate_hz: float, tau_mem: float,
                           tau_syn: float, dt: float,
                           sigma_target: float = 1.0) -> float:
    """Weight standard deviation hitting a target membrane std.

    Presynaptic units are modeled as independent binary spike trains firing
    with probability p = rate * dt per step. Pooled over neurons and time,
    the free membrane variance from zero-mean weights of variance s**2 is
    fan_in * s**2 * (p(1-p) * sum(e**2) + p**2 * sum(e)**2); solving for s
    gives the returned scale.
    """
    if rate_hz <= 0.0:
        raise ValueError("presynaptic rate must be positive")
    if fan_in <= 0:
        raise ValueError("fan_in must be positive")
    beta_mem = math.exp(-dt / tau_mem)
    beta_syn = math.exp(-dt / tau_syn)
    kernel_sum, kernel_sq = psp_kernel_sums(beta_mem, beta_syn)
    p = min(rate_hz * dt, 1.0)
    var_unit = p * (1.0 - p) * kernel_sq + p * p * kernel_sum ** 2
    return sigma_target / math.sqrt(fan_in * var_unit)


class DenseConnection:
    """y = scale * (x @ w) + b."""

    def __init__(self, n_in: int, n_out: int, weight_std: float,
                 rng: np.random.Generator, scale: float = 1.0):
        self.n_in = n_in
        self.n_out = n_out
        self.w = Tensor(rng.normal(0.0, weight_std, size=(n_in, n_out)),
                        requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)
        self.scale = Tensor(np.asarray(scale), requires_grad=True)

    def apply(self, x: Tensor) -> Tensor:
        return (x @ self.w) * self.scale + self.b

    def param_count(self) -> int:
        return self.n_in * self.n_out + self.n_out

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [("w", self.w), ("b", self.b), ("scale", self.scale)]

    def weight_tensors(self) -> list[Tensor]:
        return [self.w]


class LowRankConnection:
    """y = scale * ((x @ a) @ b_mat) + b, a rank-d factorization of a dense map."""

    def __init__(self, n_in: int, n_out: int, rank: int, weight_std: float,
                 rng: np.random.Generator, scale: float = 1.0):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.n_in = n_in
        self.n_out = n_out
        self.rank = rank
        # stage std chosen so entries of (a @ b_mat) have variance weight_std**2
        stage_std = (weight_std ** 2 / rank) ** 0.25
        self.a = Tensor(rng.normal(0.0, stage_std, size=(n_in, rank)),
                        requires_grad=True)
        self.b_mat = Tensor(rng.normal(0.0, stage_std, size=(rank, n_out)),
                            requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)
        self.scale = Tensor(np.asarray(scale), requires_grad=True)

    @classmethod
    def from_dense(cls, w: np.ndarray, rank: int | None = None,
                   scale: float = 1.0) -> "LowRankConnection":
        """Factor an explicit weight matrix through an SVD bottleneck."""
        w = np.asarray(w, dtype=float)
        n_in, n_out = w.shape
        rank = min(n_in, n_out) if rank is None else rank
        conn = cls.__new__(cls)
        conn.n_in, conn.n_out, conn.rank = n_in, n_out, rank
        u, s, vt = np.linalg.svd(w, full_matrices=False)
        root = np.sqrt(s[:rank])
        conn.a = Tensor(u[:, :rank] * root, requires_grad=True)
        conn.b_mat = Tensor(root[:, None] * vt[:rank], requires_grad=True)
        conn.b = Tensor(np.zeros(n_out), requires_grad=True)
        conn.scale = Tensor(np.asarray(scale), requires_grad=True)
        return conn

    def apply(self, x: Tensor) -> Tensor:
        return ((x @ self.a) @ self.b_mat) * self.scale + self.b

    def param_count(self) -> int:
        return self.n_in * self.rank + self.rank * self.n_out + self.n_out

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [("a", self.a), ("b_mat", self.b_mat), ("b", self.b),
                ("scale", self.scale)]

    def weight_tensors(self) -> list[Tensor]:
        return [self.a, self.b_mat]


def connection_apply(conn, x: Tensor) -> Tensor:
    return conn.apply(x)


def encode_input(x: Tensor, w_in: Tensor, b_in: Tensor) -> Tensor:
    """Injected current from the continuous input vector: x @ w_in + b_in."""
    return x @ w_in + b_in
