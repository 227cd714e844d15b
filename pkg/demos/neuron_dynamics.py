"""Single-neuron dynamics: leaky integration, spiking, adaptive thresholds.

Drives one LIF neuron and one ALIF neuron with the same current protocol
(quiet, constant drive, then noisy drive) and prints a compact trace. The
adaptive neuron raises its threshold after each spike and slowly lowers the
baseline while silent, so it fires sparsely under sustained input and
recovers excitability on its own.

Run:  python3 demos/neuron_dynamics.py
"""

import numpy as np

from spikectrl.neurons import LayerState, NeuronParams, alif_step, lif_step
from spikectrl.tensor import Tensor


def fresh_state(adaptive: bool) -> LayerState:
    z = np.zeros((1, 1))
    if adaptive:
        return LayerState(I=Tensor(z), U=Tensor(z.copy()), S=Tensor(z.copy()),
                          theta_b=Tensor(np.ones_like(z)),
                          theta_a=Tensor(z.copy()))
    return LayerState(I=Tensor(z), U=Tensor(z.copy()), S=Tensor(z.copy()))


def drive_protocol(rng, steps=350):
    current = np.zeros(steps)
    current[50:200] = 1.6                      # constant drive
    current[230:330] = 1.2 + rng.normal(0, 0.8, 100)  # noisy drive
    return current


def main():
    dt = 0.001
    rng = np.random.default_rng(0)
    current = drive_protocol(rng)
    lif_params = NeuronParams(tau_mem=0.01, tau_syn=0.002)
    alif_params = NeuronParams(tau_mem=0.01, tau_syn=0.002, tau_ada=0.1,
                               delta_theta=10.0, xi_theta=0.3)

    zero = Tensor(np.zeros((1, 1)))
    lif = fresh_state(False)
    alif = fresh_state(True)
    traces = {"u_lif": [], "s_lif": [], "u_alif": [], "s_alif": [],
              "theta": []}
    for c in current:
        inj = Tensor(np.full((1, 1), c))
        lif, s1 = lif_step(lif, zero, inj, lif_params, dt)
        alif, s2 = alif_step(alif, zero, inj, alif_params, dt)
        traces["u_lif"].append(lif.U.item())
        traces["s_lif"].append(s1.item())
        traces["u_alif"].append(alif.U.item())
        traces["s_alif"].append(s2.item())
        traces["theta"].append(alif.theta_b.item()
                               + alif_params.xi_theta * alif.theta_a.item())

    n_lif = int(sum(traces["s_lif"]))
    n_alif = int(sum(traces["s_alif"]))
    print("constant + noisy current protocol over", len(current), "steps")
    print(f"LIF spikes:  {n_lif:3d}   (fixed threshold 1.0)")
    print(f"ALIF spikes: {n_alif:3d}   (adaptive threshold, "
          f"final {traces['theta'][-1]:.2f})")
    print("\nspike raster (.=silent  |=spike), 1 char per 5 steps:")
    for name, key in (("LIF ", "s_lif"), ("ALIF", "s_alif")):
        row = "".join("|" if any(traces[key][i:i + 5]) else "."
                      for i in range(0, len(current), 5))
        print(f"  {name} {row}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(3, 1, figsize=(9, 6), sharex=True)
        t = np.arange(len(current)) * dt * 1000
        axes[0].plot(t, current, color="gray")
        axes[0].set_ylabel("I_inj")
        axes[1].plot(t, traces["u_lif"], label="LIF U")
        axes[1].plot(t, traces["u_alif"], label="ALIF U")
        axes[1].legend(loc="upper right")
        axes[1].set_ylabel("membrane")
        axes[2].plot(t, traces["theta"], color="tab:red",
                     label="ALIF threshold")
        axes[2].axhline(1.0, color="black", lw=0.5, label="LIF threshold")
        axes[2].legend(loc="upper right")
        axes[2].set_xlabel("time [ms]")
        fig.tight_layout()
        out = "demos/out_neuron_dynamics.png"
        fig.savefig(out, dpi=120)
        print(f"\nfigure written to {out}")
    except ImportError:
        print("\n(matplotlib not installed; skipping the figure)")


if __name__ == "__main__":
    main()
