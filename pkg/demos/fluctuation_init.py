"""Fluctuation-driven weight scaling hits the target membrane statistics.

Draws weights from the kernel-aware scale, simulates the free membrane of
a layer under independent binary spike trains at the presumed rate, and
compares the measured statistics to the (0, 1) target. Also shows what the
same simulation looks like under naive scaling, which either silences or
saturates the layer.

Run:  python3 demos/fluctuation_init.py
"""

import math

import numpy as np

from spikectrl.connections import fluctuation_weight_std


def membrane_stats(sigma_w, fan_in=200, width=256, rate=125.0, steps=8000,
                   tau_mem=0.01, tau_syn=0.002, dt=0.02 / 7, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, sigma_w, (fan_in, width))
    p = rate * dt
    bm, bs = math.exp(-dt / tau_mem), math.exp(-dt / tau_syn)
    i_syn = np.zeros(width)
    u = np.zeros(width)
    samples = []
    for t in range(steps):
        x = (rng.random(fan_in) < p).astype(float)
        i_syn = bs * i_syn + x @ w
        u = bm * u + (1 - bm) * i_syn
        if t >= steps // 5:
            samples.append(u.copy())
    pooled = np.asarray(samples)
    return pooled.mean(), pooled.std()


def main():
    fan_in = 200
    sigma = fluctuation_weight_std(fan_in, 125.0, 0.01, 0.002, 0.02 / 7)
    print(f"kernel-aware weight std for fan-in {fan_in} at 125 Hz: "
          f"{sigma:.5f}\n")
    print("scheme                weight std    membrane mean   membrane std")
    for label, s in [("fluctuation-driven", sigma),
                     ("naive 1/sqrt(n)", 1.0 / math.sqrt(fan_in)),
                     ("10x too small", sigma / 10.0),
                     ("10x too large", sigma * 10.0)]:
        mean, std = membrane_stats(s, fan_in=fan_in)
        print(f"{label:<22}{s:10.5f}    {mean:+12.4f}   {std:12.4f}")
    print("\ntarget: mean 0, std 1. Too-small weights leave every neuron "
          "far below\nthreshold; too-large weights drive constant spiking. "
          "The kernel-aware scale\nputs membranes right at the fluctuation "
          "regime where surrogate gradients\nare informative.")

    print("\nsweeping the presumed rate (same taus):")
    for rate in (25.0, 125.0, 500.0):
        s = fluctuation_weight_std(fan_in, rate, 0.01, 0.002, 0.02 / 7)
        mean, std = membrane_stats(s, fan_in=fan_in, rate=rate, seed=1)
        print(f"  rate {rate:6.0f} Hz -> weight std {s:.5f}, measured "
              f"membrane std {std:.3f}")


if __name__ == "__main__":
    main()
