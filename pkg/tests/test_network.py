import numpy as np
import pytest

from conftest import grad_close
from spikectrl.network import Network, NetworkConfig
from spikectrl.neurons import NeuronParams
from spikectrl.surrogates import SurrogateConfig
from spikectrl.tensor import Tensor


def toy_config(head="delta", recurrent=False, neuron="alif", hidden=12,
               smooth=False, latent=None, sub_steps=3):
    return NetworkConfig(
        input_size=6, hidden_size=hidden, output_size=3, neuron=neuron,
        recurrent=recurrent, head=head,
        params=NeuronParams(tau_mem=0.01, tau_syn=0.002, tau_ada=0.1,
                            delta_theta=10.0 if neuron == "alif" else 0.0,
                            xi_theta=0.1 if neuron == "alif" else 0.0,
                            learnable_tau=True),
        surrogate=SurrogateConfig("gaussian", 16.0, 1.0),
        sub_steps=sub_steps, dt_env=0.02, latent_dim=latent, smooth=smooth)


def test_policy_head_output_always_bounded():
    # tanh keeps outputs inside [-1, 1] for any parameters; under float
    # rounding a deeply saturated unit returns exactly +-1.0, and moderate
    # drives stay strictly inside the open interval
    rng = np.random.default_rng(0)
    for seed in range(3):
        net = Network(toy_config(head="tanh"),
                      np.random.default_rng(seed))
        net.conn_out.w.data[...] *= 50.0
        net.reset(4)
        for _ in range(5):
            y = net.step(Tensor(rng.normal(0, 3, size=(4, 6)))).numpy()
            assert np.all(np.abs(y) <= 1.0)
    net = Network(toy_config(head="tanh"), np.random.default_rng(1))
    net.reset(4)
    for _ in range(5):
        y = net.step(Tensor(rng.normal(0, 1, size=(4, 6)))).numpy()
        assert np.all(y > -1.0) and np.all(y < 1.0)


def test_zero_weight_network_outputs_zero():
    net = Network(toy_config(head="delta", recurrent=True),
                  np.random.default_rng(1))
    for _, conn in net._connections():
        for _, t in conn.named_parameters():
            if t.ndim:
                t.data[...] = 0.0
    net.reset(2)
    x = Tensor(np.random.default_rng(2).normal(size=(2, 6)))
    for _ in range(4):
        assert np.all(net.step(x).numpy() == 0.0)


def test_spike_record_shape_and_binary_entries():
    cfg = toy_config(sub_steps=5)
    net = Network(cfg, np.random.default_rng(3))
    net.reset(2)
    record = {"hidden1": [], "hidden2": []}
    net.step(Tensor(np.random.default_rng(4).normal(size=(2, 6))),
             record=record)
    for layer in ("hidden1", "hidden2"):
        rec = np.stack(record[layer])
        assert rec.shape == (cfg.sub_steps, 2, cfg.hidden_size)
        assert set(np.unique(rec)).issubset({0.0, 1.0})


def test_step_before_reset_raises():
    net = Network(toy_config(), np.random.default_rng(5))
    with pytest.raises(RuntimeError, match="reset"):
        net.step(Tensor(np.zeros((1, 6))))


def test_forward_is_deterministic_across_rebuilds():
    def run():
        net = Network(toy_config(recurrent=True), np.random.default_rng(7))
        net.reset(3)
        rng = np.random.default_rng(8)
        out = []
        for _ in range(4):
            out.append(net.step(Tensor(rng.normal(size=(3, 6)))).numpy())
        return np.stack(out)

    assert np.array_equal(run(), run())


def test_tanh_head_forbids_recurrence():
    with pytest.raises(ValueError, match="recurrence"):
        toy_config(head="tanh", recurrent=True)


def test_low_rank_network_runs_and_counts_fewer_parameters():
    dense = Network(toy_config(hidden=16), np.random.default_rng(9))
    compressed = Network(toy_config(hidden=16, latent=2),
                         np.random.default_rng(9))
    assert compressed.param_count() < dense.param_count()
    compressed.reset(1)
    y = compressed.step(Tensor(np.zeros((1, 6))))
    assert y.shape == (1, 3)


def test_recurrent_config_adds_recurrent_connection():
    net = Network(toy_config(recurrent=True), np.random.default_rng(10))
    assert net.conn_rec is not None
    names = [n for n, _ in net.named_parameters()]
    assert any(n.startswith("rec.") for n in names)
    net_ff = Network(toy_config(recurrent=False), np.random.default_rng(10))
    assert net_ff.conn_rec is None


def test_smooth_mode_full_network_gradient_matches_finite_differences():
    # spike replaced by a sigmoid: unrolled BPTT gradients must agree with
    # central differences on a small recurrent network
    cfg = toy_config(recurrent=True, hidden=8, smooth=True, sub_steps=3)
    net = Network(cfg, np.random.default_rng(11))
    rng = np.random.default_rng(12)
    inputs = rng.normal(size=(4, 2, 6))
    target = rng.normal(size=(2, 3))

    def forward():
        net.reset(2)
        out = None
        for t in range(4):
            out = net.step(Tensor(inputs[t]))
        return ((out - Tensor(target)).square()).mean()

    loss = forward()
    loss.backward()
    params = dict(net.named_parameters())
    picked = ["in.w", "rec.w", "h.w", "out.w", "out.scale", "in.b",
              "cell1.tau_mem_log", "cell2.tau_syn_log",
              "cell1.tau_ada_log", "readout.tau_mem_log"]
    analytic = {n: params[n].grad.copy() for n in picked}
    for name in picked:
        arr = params[name].data
        flat = arr.reshape(-1)
        idx = np.random.default_rng(13).choice(flat.size,
                                               size=min(5, flat.size),
                                               replace=False)
        for i in idx:
            ref = central_difference_entry(forward, flat, int(i))
            got = analytic[name].reshape(-1)[int(i)]
            assert grad_close(got, ref, rtol=1e-4), name


def central_difference_entry(f, flat, i, eps=1e-6):
    orig = flat[i]
    flat[i] = orig + eps
    hi = f().item()
    flat[i] = orig - eps
    lo = f().item()
    flat[i] = orig
    return (hi - lo) / (2.0 * eps)


def test_normal_mode_spike_backward_uses_surrogate_exactly():
    cfg = toy_config(hidden=6, sub_steps=2, neuron="lif")
    net = Network(cfg, np.random.default_rng(14))
    net.reset(1)
    x = Tensor(np.random.default_rng(15).normal(size=(1, 6)))
    out = net.step(x)
    out.sum().backward()
    for t in net.main_parameters():
        if t.grad is not None:
            assert np.all(np.isfinite(t.grad))


def test_learned_taus_stay_positive_after_updates():
    from spikectrl.optim import Adam

    net = Network(toy_config(hidden=8), np.random.default_rng(16))
    opt = Adam([("tau", net.tau_parameters())])
    rng = np.random.default_rng(17)
    for _ in range(10):
        net.reset(2)
        out = net.step(Tensor(rng.normal(size=(2, 6))))
        loss = out.square().mean()
        loss.backward()
        opt.step({"tau": 0.05})
        for _, t in [("m", p) for p in net.tau_parameters()]:
            t.grad = None
    for cell in (net.cell1, net.cell2, net.readout):
        for tau_log in cell.tau_parameters():
            assert np.all(np.exp(tau_log.data) > 0.0)


def test_set_trainable_freezes_and_restores():
    net = Network(toy_config(hidden=8), np.random.default_rng(18))
    net.set_trainable(False)
    assert all(not t.requires_grad for t in net.main_parameters())
    assert all(not t.requires_grad for t in net.tau_parameters())
    net.set_trainable(True)
    assert all(t.requires_grad for t in net.main_parameters())
    assert all(t.requires_grad for t in net.tau_parameters())
