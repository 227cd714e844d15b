"""Factored connections: parameter counts and exactness.

Shows the parameter savings of routing inter-population weights through a
low-rank bottleneck, that an SVD factorization at full rank reproduces a
dense map to machine precision, and how truncation error grows as the
bottleneck narrows.

Run:  python3 demos/low_rank_compression.py
"""

import numpy as np

from spikectrl.connections import DenseConnection, LowRankConnection
from spikectrl.network import Network, NetworkConfig
from spikectrl.neurons import NeuronParams
from spikectrl.surrogates import SurrogateConfig
from spikectrl.tensor import Tensor


def main():
    rng = np.random.default_rng(0)
    n = 512
    dense = DenseConnection(n, n, 0.01, rng)
    print(f"dense {n}x{n} connection: {dense.param_count():,} parameters")
    for rank in (8, 16, 32, 64):
        lr = LowRankConnection(n, n, rank, 0.01, rng)
        ratio = lr.param_count() / dense.param_count()
        print(f"  rank {rank:3d}: {lr.param_count():9,} parameters "
              f"({ratio:5.1%} of dense)")

    print("\nSVD factorization error against a dense map (48x32):")
    w = rng.normal(size=(48, 32))
    x = rng.normal(size=(16, 48))
    exact = x @ w
    for rank in (4, 8, 16, 32):
        lr = LowRankConnection.from_dense(w, rank)
        err = np.max(np.abs(lr.apply(Tensor(x)).data - exact))
        print(f"  rank {rank:2d}: max abs output error {err:.3e}")

    print("\nfull networks at 256 neurons/layer:")
    params = NeuronParams(tau_mem=0.01, tau_syn=0.002)
    for latent in (None, 16, 64):
        cfg = NetworkConfig(input_size=10, hidden_size=256, output_size=8,
                            neuron="lif", recurrent=True, head="delta",
                            params=params, surrogate=SurrogateConfig(),
                            latent_dim=latent)
        net = Network(cfg, np.random.default_rng(1))
        label = "full rank" if latent is None else f"rank {latent}"
        print(f"  {label:>9}: {net.param_count():9,} connection parameters")


if __name__ == "__main__":
    main()
