"""Adam optimizer with parameter groups and the exponential LR schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """First and second moment estimates for one parameter."""

    m: np.ndarray
    v: np.ndarray


class Adam:
    """Bias-corrected Adam over named parameter groups.

    Groups are (name, [tensors]) pairs; each group is stepped with its own
    learning rate so time-constant parameters can move faster than weights.
    A group with a zero rate is left untouched. The shared step counter ``t``
    increments once per ``step`` call.
    """

    def __init__(self, groups: list[tuple[str, list[Tensor]]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.groups = groups
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.state: dict[int, AdamState] = {}
        for _, params in groups:
            for p in params:
                self.state[id(p)] = AdamState(
                    m=np.zeros_like(p.data), v=np.zeros_like(p.data))

    def zero_grad(self) -> None:
        for _, params in self.groups:
            for p in params:
                p.grad = None

    def step(self, lrs: dict[str, float]) -> None:
        """Apply one update; ``lrs`` maps group name to learning rate."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, params in self.groups:
            lr = lrs[name]
            if lr == 0.0:
                continue
            for p in params:
                g = p.grad
                if g is None:
                    continue
                if g.shape != p.data.shape:
                    raise ValueError(
                        f"gradient shape {g.shape} does not match parameter "
                        f"shape {p.data.shape} in group {name!r}")
                st = self.state[id(p)]
                st.m *= self.beta1
                st.m += (1.0 - self.beta1) * g
                st.v *= self.beta2
                st.v += (1.0 - self.beta2) * (g * g)
                m_hat = st.m / c1
                v_hat = st.v / c2
                p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    # -- checkpoint support ---------------------------------------------------

    def named_state_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, params in self.groups:
            for i, p in enumerate(params):
                st = self.state[id(p)]
                out.append((f"{name}.{i}.m", st.m))
                out.append((f"{name}.{i}.v", st.v))
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = int(t)
        for name, params in self.groups:
            for i, p in enumerate(params):
                st = self.state[id(p)]
                st.m[...] = arrays[f"{name}.{i}.m"]
                st.v[...] = arrays[f"{name}.{i}.v"]


def adam_step(params: list[Tensor], grads: list[np.ndarray], opt: Adam,
              lr: float) -> None:
    """Single-group convenience wrapper: assign grads, then step at ``lr``."""
    if len(params) != len(grads):
        raise ValueError("params and grads length mismatch")
    for p, g in zip(params, grads):
        if np.shape(g) != p.data.shape:
            raise ValueError(
                f"gradient shape {np.shape(g)} does not match parameter "
                f"shape {p.data.shape}")
        p.grad = np.asarray(g, dtype=p.data.dtype)
    name = opt.groups[0][0]
    opt.step({name: lr})


@dataclass
class LrSchedule:
    """Exponentially decayed learning rate with a positive floor.

    ``lr_at(t)`` returns ``max(gamma**t * alpha0, alpha_min)``, so a decay
    factor of 1.0 is a constant schedule and the output always stays within
    [alpha_min, alpha0] for gamma <= 1.
    """

    alpha0: float
    gamma: float = 1.0
    alpha_min: float = 1e-4

    def __post_init__(self):
        if self.alpha0 <= 0.0:
            raise ValueError("alpha0 must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.alpha_min <= 0.0:
            raise ValueError("alpha_min must be positive")
        if self.alpha_min > self.alpha0:
            raise ValueError("alpha_min must not exceed alpha0")

    def lr_at(self, t: int) -> float:
        if t < 0:
            raise ValueError("epoch index must be >= 0")
        return max(self.gamma ** t * self.alpha0, self.alpha_min)
