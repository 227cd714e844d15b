"""Shapes of the three surrogate gradient functions.

Evaluates the sigmoid-derivative, heavy-tailed, and Gaussian-mixture
surrogates across steepness values and shows how sharply each localizes
the gradient around the spike threshold. All are normalized so the peak at
the threshold equals the scale factor.

Run:  python3 demos/surrogate_profiles.py
"""

import numpy as np

from spikectrl.surrogates import SurrogateConfig

KINDS = ("sigmoid", "superspike", "gaussian")


def main():
    x = np.linspace(-1.0, 1.0, 9)
    print("surrogate values on [-1, 1] at beta=16, gamma=1:\n")
    header = "      x: " + "".join(f"{v:8.2f}" for v in x)
    print(header)
    for kind in KINDS:
        cfg = SurrogateConfig(kind, 16.0, 1.0)
        row = "".join(f"{val:8.4f}" for val in cfg.grad(x))
        print(f"{kind:>9}: {row}")

    print("\npeak value at x=0 for beta in {1, 4, 16, 64}:")
    for kind in KINDS:
        peaks = [float(SurrogateConfig(kind, b, 1.0).grad(0.0))
                 for b in (1.0, 4.0, 16.0, 64.0)]
        print(f"{kind:>9}: " + "  ".join(f"{p:.12f}" for p in peaks))

    print("\nhalf-width at half-maximum (how localized each shape is):")
    grid = np.linspace(0.0, 2.0, 20001)
    for kind in KINDS:
        for beta in (4.0, 16.0):
            vals = SurrogateConfig(kind, beta, 1.0).grad(grid)
            hwhm = grid[np.argmax(vals < 0.5)]
            print(f"{kind:>9} beta={beta:4.0f}: {hwhm:.4f}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 3, figsize=(12, 3.2), sharey=True)
        fine = np.linspace(-1.0, 1.0, 1001)
        for ax, kind in zip(axes, KINDS):
            for beta in (4.0, 16.0, 64.0):
                ax.plot(fine, SurrogateConfig(kind, beta, 1.0).grad(fine),
                        label=f"beta={beta:.0f}")
            ax.set_title(kind)
            ax.set_xlabel("U - threshold")
        axes[0].set_ylabel("surrogate gradient")
        axes[0].legend()
        fig.tight_layout()
        out = "demos/out_surrogate_profiles.png"
        fig.savefig(out, dpi=120)
        print(f"\nfigure written to {out}")
    except ImportError:
        print("\n(matplotlib not installed; skipping the figure)")


if __name__ == "__main__":
    main()
