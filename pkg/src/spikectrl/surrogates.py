"""Surrogate derivatives for the spike threshold nonlinearity.

Three families are supported, each normalized so the peak of the surrogate
equals the scale factor gamma (at x = 0 for the symmetric profiles used
here). The Gaussian mixture has no closed-form peak, so its normalizer is
found once numerically on a fine grid around zero and cached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

SIGMOID_NORM = 0.25          # peak of s(x)(1 - s(x))
GAUSS_LOBE_WEIGHT = 0.15     # h, weight of the two negative side lobes
GAUSS_LOBE_WIDTH = 6.0       # s, side lobe width relative to the center

_gauss_peak_cache: float | None = None


def _gauss(x, mu, sigma):
    return np.exp(-((x - mu) ** 2) / (2.0 * sigma ** 2)) / (
        np.sqrt(2.0 * np.pi) * sigma)


def _gauss_mixture_unit(z):
    """Mixture profile at steepness 1; the full profile is beta*f(beta*x)."""
    h, s = GAUSS_LOBE_WEIGHT, GAUSS_LOBE_WIDTH
    return (_gauss(z, 0.0, 1.0) * (1.0 + h)
            - _gauss(z, 1.0, s) * h
            - _gauss(z, -1.0, s) * h)


def _gauss_mixture_peak() -> float:
    """Peak of the unit-steepness mixture, located by grid search around 0."""
    global _gauss_peak_cache
    if _gauss_peak_cache is None:
        z = np.linspace(-8.0, 8.0, 160001)  # odd count, includes z = 0
        _gauss_peak_cache = float(_gauss_mixture_unit(z).max())
    return _gauss_peak_cache


def _gauss_mixture_constants(gamma: float):
    """Folded center/lobe coefficients of the normalized mixture."""
    h, s = GAUSS_LOBE_WEIGHT, GAUSS_LOBE_WIDTH
    peak = _gauss_mixture_peak()
    root = np.sqrt(2.0 * np.pi)
    center = gamma * (1.0 + h) / (root * peak)
    lobe = gamma * h / (root * s * peak)
    return center, lobe, s


@dataclass(frozen=True)
class SurrogateConfig:
    """Shape of the backward pass through the spike threshold.

    kind is one of 'sigmoid', 'superspike', or 'gaussian'; beta sets the
    steepness around threshold and gamma the overall amplitude, with the
    normalization chosen so grad(0) == gamma for every kind.
    """

    kind: str = "gaussian"
    beta: float = 16.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sigmoid", "superspike", "gaussian"):
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    def grad(self, x):
        """Surrogate derivative, vectorized elementwise over ``x``."""
        x = np.asarray(x)
        if self.kind == "sigmoid":
            s = 1.0 / (1.0 + np.exp(-self.beta * x))
            return (self.gamma / SIGMOID_NORM) * (s * (1.0 - s))
        if self.kind == "superspike":
            return self.gamma / (self.beta * np.abs(x) + 1.0) ** 2
        # normalized mixture gamma*f(beta*x)/f_max with the weights folded
        # into two coefficients; the beta factors of profile and peak cancel
        center, lobe, s = _gauss_mixture_constants(self.gamma)
        z = self.beta * x
        out = np.exp(z * z * -0.5)
        out *= center
        zm = z - 1.0
        zp = z + 1.0
        side = np.exp(zm * zm * (-0.5 / (s * s)))
        side += np.exp(zp * zp * (-0.5 / (s * s)))
        side *= lobe
        return out - side


def surrogate_grad(x, cfg: SurrogateConfig):
    return cfg.grad(x)


def spike(u_minus_theta: Tensor, cfg: SurrogateConfig) -> Tensor:
    """Binary threshold crossing with the configured surrogate backward.

    Forward is exactly 1.0 where the input is >= 0 and exactly 0.0 below;
    backward scales the upstream gradient by ``cfg.grad`` at the input.
    """
    return T.spike(u_minus_theta, cfg.grad)
