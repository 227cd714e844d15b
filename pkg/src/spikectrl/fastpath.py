"""Fused forward/backward for one environment step of a network.

The modular cell path records a few dozen tape nodes per sub-step, which is
correct but slow at training scale. This module runs the whole env step
(every sub-step, all three layers, the synchronous spike exchange) as a
single tape node with a hand-written backward pass over raw arrays. The
arithmetic and its ordering mirror the modular cells, so both paths produce
the same trajectories; an equivalence test pins them together.

The fused path does not support smooth test mode, activity probes, or the
baseline-threshold floor; networks fall back to the modular path there.
State arrays live inside the step nodes: each node keeps its final state
and a side-channel gradient accumulator that the following step's backward
fills before the engine reaches this node.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from . import tensor as T
from .tensor import Tensor

STATE_KEYS = ("i1", "u1", "s1", "tb1", "ta1",
              "i2", "u2", "s2", "tb2", "ta2", "i3", "u3")


class _StepNode(Tensor):
    """Tape node for one fused env step, carrying its saved forward state."""

    __slots__ = ("states", "spike_saves", "conn_saves", "saved_in",
                 "x_tensor", "prev_node", "state_grads")


def _acc_param(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = grad
    else:
        tensor.grad += grad


class _ConnOp:
    """Raw-array view of a connection with gradient accumulation."""

    def __init__(self, conn):
        self.low_rank = hasattr(conn, "a")
        if self.low_rank:
            self.a = conn.a
            self.b_mat = conn.b_mat
        else:
            self.w = conn.w
        self.bias = conn.b
        self.scale = conn.scale

    def params(self):
        mats = [self.a, self.b_mat] if self.low_rank else [self.w]
        return mats + [self.bias, self.scale]

    def forward(self, x: np.ndarray):
        if self.low_rank:
            h = x @ self.a.data
            z = h @ self.b_mat.data
            saved = (x, h, z)
        else:
            z = x @ self.w.data
            saved = (x, None, z)
        out = z * self.scale.data
        out += self.bias.data
        return out, saved

    def backward(self, dout: np.ndarray, saved) -> np.ndarray:
        x, h, z = saved
        if self.scale.requires_grad:
            _acc_param(self.scale, np.asarray((dout * z).sum(),
                                              dtype=dout.dtype))
        if self.bias.requires_grad:
            _acc_param(self.bias, dout.sum(axis=0))
        dz = dout * self.scale.data
        if self.low_rank:
            dh = dz @ self.b_mat.data.T
            if self.b_mat.requires_grad:
                _acc_param(self.b_mat, h.T @ dz)
            if self.a.requires_grad:
                _acc_param(self.a, x.T @ dh)
            return dh @ self.a.data.T
        if self.w.requires_grad:
            _acc_param(self.w, x.T @ dz)
        return dz @ self.w.data.T


class WindowPlan:
    """Per-window constants: decay tensors, their arrays, connection views."""

    def __init__(self, net):
        cfg = net.cfg
        self.adaptive = cfg.neuron == "alif"
        self.recurrent = net.conn_rec is not None
        self.sub_steps = cfg.sub_steps
        self.theta0 = cfg.params.theta0
        self.xi = cfg.params.xi_theta
        self.decay_step = cfg.params.delta_theta * cfg.dt_snn
        self.surrogate = cfg.surrogate.grad
        self.u_rest = cfg.params.u_rest
        self.width = cfg.hidden_size
        self.out_width = cfg.output_size

        self.conn_in = _ConnOp(net.conn_in)
        self.conn_rec = _ConnOp(net.conn_rec) if self.recurrent else None
        self.conn_h = _ConnOp(net.conn_h)
        self.conn_out = _ConnOp(net.conn_out)

        # scalars cast to the run dtype so f32 kernels stay f32 throughout
        scalar = net.conn_in.w.data.dtype.type
        self.xi_s = scalar(self.xi)
        self.theta0_s = scalar(self.theta0)
        self.decay_step_s = scalar(self.decay_step)

        # decay tensors stay in the graph so tau gradients flow once per window
        self.d1 = net.cell1.decays()
        self.d2 = net.cell2.decays()
        self.d3 = net.readout.decays()
        self.beta_tensors = list(self.d1) + list(self.d2) + list(self.d3)
        self.bm1, self.bs1 = self.d1[0].data, self.d1[1].data
        self.ba1 = self.d1[2].data if self.adaptive else None
        self.bm2, self.bs2 = self.d2[0].data, self.d2[1].data
        self.ba2 = self.d2[2].data if self.adaptive else None
        self.bm3, self.bs3 = self.d3[0].data, self.d3[1].data
        self.cm1 = 1.0 - self.bm1
        self.cm2 = 1.0 - self.bm2
        self.cm3 = 1.0 - self.bm3

        self.param_tensors = (self.conn_in.params() + self.conn_h.params()
                              + self.conn_out.params()
                              + (self.conn_rec.params() if self.recurrent
                                 else []))

    def initial_state(self, batch: int, dtype) -> dict:
        def zeros(width):
            return np.zeros((batch, width), dtype=dtype)

        state = {"i1": zeros(self.width),
                 "u1": np.full((batch, self.width), self.u_rest, dtype=dtype),
                 "s1": zeros(self.width),
                 "i2": zeros(self.width),
                 "u2": np.full((batch, self.width), self.u_rest, dtype=dtype),
                 "s2": zeros(self.width),
                 "i3": zeros(self.out_width),
                 "u3": np.full((batch, self.out_width), self.u_rest,
                               dtype=dtype)}
        if self.adaptive:
            state["tb1"] = np.full((batch, self.width), self.theta0,
                                   dtype=dtype)
            state["ta1"] = zeros(self.width)
            state["tb2"] = np.full((batch, self.width), self.theta0,
                                   dtype=dtype)
            state["ta2"] = zeros(self.width)
        return state


def _layer_const(plan: WindowPlan, layer: int):
    if layer == 1:
        return (plan.bm1, plan.bs1, plan.cm1, plan.ba1,
                ("i1", "u1", "s1", "tb1", "ta1"), plan.d1)
    return (plan.bm2, plan.bs2, plan.cm2, plan.ba2,
            ("i2", "u2", "s2", "tb2", "ta2"), plan.d2)


def _cell_forward(plan, layer, state_in, drive, saves):
    """One spiking sub-step; mirrors the modular cell arithmetic."""
    bm, bs, cm, ba, keys, _ = _layer_const(plan, layer)
    i_key, u_key, s_key, tb_key, ta_key = keys
    if K.AVAILABLE:
        if plan.adaptive:
            i_new, u_new, s_new, tb, ta, v, theta = K.alif_forward(
                state_in[i_key], state_in[u_key], state_in[tb_key],
                state_in[ta_key], drive, bm, bs, cm, ba, plan.xi_s,
                plan.theta0_s, plan.decay_step_s)
            out = {i_key: i_new, u_key: u_new, s_key: s_new,
                   tb_key: tb, ta_key: ta}
        else:
            i_new, u_new, s_new, v = K.lif_forward(
                state_in[i_key], state_in[u_key], drive, bm, bs, cm,
                plan.theta0_s)
            theta = None
            out = {i_key: i_new, u_key: u_new, s_key: s_new}
        if saves is not None:
            saves.append((v, theta))
        return out
    i_new = state_in[i_key] * bs
    i_new += drive
    u_pre = state_in[u_key] * bm
    u_pre += i_new * cm
    if plan.adaptive:
        theta = state_in[tb_key] + plan.xi * state_in[ta_key]
    else:
        theta = plan.theta0
    v = u_pre - theta
    s_new = (v >= 0.0).astype(v.dtype)
    u_new = u_pre          # reuse the buffer: u_pre is recoverable from v
    u_new -= theta * s_new
    out = {i_key: i_new, u_key: u_new, s_key: s_new}
    if plan.adaptive:
        tb = (state_in[tb_key] - plan.decay_step
              + (plan.theta0 - state_in[tb_key]) * s_new)
        ta = state_in[ta_key] * ba
        ta += s_new
        out[tb_key] = tb
        out[ta_key] = ta
    if saves is not None:
        saves.append((v, theta if plan.adaptive else None))
    return out


def _forward(plan, x: np.ndarray, state: dict, keep: bool):
    """Run all sub-steps; returns (states, spike saves, conn saves, inj save)."""
    inj, saved_in = plan.conn_in.forward(x)
    states = [state]
    spike_saves = [] if keep else None
    conn_saves = [] if keep else None
    cur = state
    for _ in range(plan.sub_steps):
        s1p, s2p = cur["s1"], cur["s2"]
        rec_saved = None
        if plan.recurrent:
            rec_out, rec_saved = plan.conn_rec.forward(s1p)
            drive1 = inj + rec_out
        else:
            drive1 = inj
        h_out, h_saved = plan.conn_h.forward(s1p)
        o_out, o_saved = plan.conn_out.forward(s2p)

        nxt = _cell_forward(plan, 1, cur, drive1, spike_saves)
        nxt.update(_cell_forward(plan, 2, cur, h_out, spike_saves))
        i3 = cur["i3"] * plan.bs3
        i3 += o_out
        u3 = cur["u3"] * plan.bm3
        u3 += i3 * plan.cm3
        nxt["i3"] = i3
        nxt["u3"] = u3
        if keep:
            conn_saves.append((rec_saved, h_saved, o_saved))
        states.append(nxt)
        cur = nxt
    return states, spike_saves, conn_saves, saved_in


def _cell_backward(plan, layer, prev, cur, v, grads, sink):
    """Reverse one spiking sub-step.

    grads holds (di, du, ds, dtb, dta) flowing into this sub-step's output
    state. Returns the same tuple for the previous sub-step's state plus
    the gradient of the synaptic drive.
    """
    bm, bs, cm, ba, keys, decay_tensors = _layer_const(plan, layer)
    i_key, u_key, s_key, tb_key, ta_key = keys
    di_next, du_next, ds_next, dtb_next, dta_next = grads
    v, theta = v
    want_beta = decay_tensors[0].requires_grad
    if K.AVAILABLE:
        surr = plan.surrogate(v)
        if plan.adaptive:
            di_p, du_p, dtb_p, dta_p, ddrive, dbm, dbs, dba = \
                K.alif_backward(di_next, du_next, ds_next, dtb_next,
                                dta_next, surr, cur[s_key], cur[i_key],
                                prev[i_key], prev[u_key], prev[tb_key],
                                prev[ta_key], theta, bm, bs, cm, ba,
                                plan.xi_s, plan.theta0_s, want_beta)
            if want_beta:
                _sink_add(sink, decay_tensors[0], dbm)
                _sink_add(sink, decay_tensors[1], dbs)
                _sink_add(sink, decay_tensors[2], dba)
            return (di_p, du_p, None, dtb_p, dta_p), ddrive
        di_p, du_p, ddrive, dbm, dbs = K.lif_backward(
            di_next, du_next, ds_next, surr, cur[i_key], prev[i_key],
            prev[u_key], bm, bs, cm, plan.theta0_s, want_beta)
        if want_beta:
            _sink_add(sink, decay_tensors[0], dbm)
            _sink_add(sink, decay_tensors[1], dbs)
        return (di_p, du_p, None, None, None), ddrive

    ds = ds_next.copy()
    if plan.adaptive:
        # theta_a = ba * theta_a_prev + s
        dta_p = dta_next * ba
        if want_beta:
            _sink_add(sink, decay_tensors[2], (dta_next * prev[ta_key])
                      .sum(axis=0))
        ds += dta_next
        # theta_b = theta_b_prev - c + (theta0 - theta_b_prev) * s
        dtb_p = dtb_next * (1.0 - cur[s_key])
        ds += dtb_next * (plan.theta0 - prev[tb_key])
        # u = u_pre - theta * s
        dtheta = -(du_next * cur[s_key])
        ds -= du_next * theta
    else:
        dta_p = dtb_p = dtheta = None
        ds -= du_next * plan.theta0

    # s = H(v) with surrogate backward; v = u_pre - theta
    dv = ds * plan.surrogate(v)
    du_pre = du_next + dv
    if plan.adaptive:
        dtheta -= dv
        dtb_p += dtheta
        dta_p += plan.xi * dtheta

    # u_pre = bm * u_prev + cm * i ; i = bs * i_prev + drive
    di = di_next + du_pre * cm
    du_p = du_pre * bm
    di_p = di * bs
    if want_beta:
        _sink_add(sink, decay_tensors[0],
                  (du_pre * (prev[u_key] - cur[i_key])).sum(axis=0))
        _sink_add(sink, decay_tensors[1], (di * prev[i_key]).sum(axis=0))
    return (di_p, du_p, None, dtb_p, dta_p), di


def _sink_add(sink: dict, tensor: Tensor, contribution: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    key = id(tensor)
    if sink.get(key) is None:
        sink[key] = contribution
    else:
        sink[key] += contribution


def _backward(plan, g_out, node):
    """Reverse the whole env step; fills parameter and input gradients."""
    states = node.states
    spike_saves = node.spike_saves
    conn_saves = node.conn_saves
    batch = g_out.shape[0]
    dtype = g_out.dtype

    def zeros(width):
        return np.zeros((batch, width), dtype=dtype)

    acc = {key: node.state_grads.get(key) for key in STATE_KEYS}
    acc["u3"] = g_out.copy() if acc["u3"] is None else acc["u3"] + g_out

    def take(key, width):
        val = acc[key]
        return zeros(width) if val is None else val

    sink: dict = {}
    d_inj = None
    for t in range(plan.sub_steps - 1, -1, -1):
        prev = states[t]
        cur = states[t + 1]
        rec_saved, h_saved, o_saved = conn_saves[t]
        v1 = spike_saves[2 * t]
        v2 = spike_saves[2 * t + 1]

        # readout: u3 = bm3*u3p + cm3*i3 ; i3 = bs3*i3p + drive
        du3 = take("u3", plan.out_width)
        di3 = take("i3", plan.out_width)
        di3 = di3 + du3 * plan.cm3
        if plan.d3[0].requires_grad:
            _sink_add(sink, plan.d3[0],
                      (du3 * (prev["u3"] - cur["i3"])).sum(axis=0))
            _sink_add(sink, plan.d3[1], (di3 * prev["i3"]).sum(axis=0))
        acc["u3"] = du3 * plan.bm3
        acc["i3"] = di3 * plan.bs3
        ds2p_from_out = plan.conn_out.backward(di3, o_saved)

        # layer 2 cell
        grads2 = (take("i2", plan.width), take("u2", plan.width),
                  take("s2", plan.width),
                  take("tb2", plan.width) if plan.adaptive else None,
                  take("ta2", plan.width) if plan.adaptive else None)
        (prev_grads2, ddrive2) = _cell_backward(plan, 2, prev, cur, v2,
                                                grads2, sink)
        acc["i2"], acc["u2"], _, acc["tb2"], acc["ta2"] = prev_grads2
        acc["s2"] = ds2p_from_out
        ds1p_from_h = plan.conn_h.backward(ddrive2, h_saved)

        # layer 1 cell
        grads1 = (take("i1", plan.width), take("u1", plan.width),
                  take("s1", plan.width),
                  take("tb1", plan.width) if plan.adaptive else None,
                  take("ta1", plan.width) if plan.adaptive else None)
        (prev_grads1, ddrive1) = _cell_backward(plan, 1, prev, cur, v1,
                                                grads1, sink)
        acc["i1"], acc["u1"], _, acc["tb1"], acc["ta1"] = prev_grads1
        ds1p = ds1p_from_h
        if plan.recurrent:
            ds1p = ds1p + plan.conn_rec.backward(ddrive1, rec_saved)
        acc["s1"] = ds1p
        d_inj = ddrive1 if d_inj is None else d_inj + ddrive1

    # through the shared, zero-order-held input injection
    dx = plan.conn_in.backward(d_inj, node.saved_in)
    if node.x_tensor.requires_grad:
        node.x_tensor._accumulate(dx, own=True)

    for tensor in plan.beta_tensors:
        grad = sink.get(id(tensor))
        if grad is not None:
            tensor._accumulate(grad, own=True)

    prev_node = node.prev_node
    if prev_node is not None:
        for key in STATE_KEYS:
            val = acc.get(key)
            if val is None or key not in states[0]:
                continue
            if key in prev_node.state_grads:
                prev_node.state_grads[key] += val
            else:
                prev_node.state_grads[key] = val
        if prev_node.grad is None:
            # the engine only visits nodes whose grad is set; the previous
            # step's readout may never have fed the loss directly
            prev_node.grad = np.zeros_like(prev_node.data)

    # release the saved forward arrays as the backward sweep passes
    node.states = None
    node.spike_saves = None
    node.conn_saves = None
    node.saved_in = None
    node.state_grads = None
    node.prev_node = None


def step_fused(net, x: Tensor, record: dict | None = None) -> Tensor:
    """One environment step through the fused path; returns readout membrane."""
    plan = net._plan
    if net._fused_state is None:
        raise RuntimeError("network state not initialized; call reset()")
    tracking = T._grad_enabled and (
        x.requires_grad
        or net._fused_prev is not None
        or any(p.requires_grad for p in plan.param_tensors)
        or any(b.requires_grad for b in plan.beta_tensors))

    states, spike_saves, conn_saves, saved_in = _forward(
        plan, x.data, net._fused_state, keep=tracking)
    final = states[-1]
    net._fused_state = final

    if record is not None:
        for t in range(plan.sub_steps):
            record["hidden1"].append(states[t + 1]["s1"].copy())
            record["hidden2"].append(states[t + 1]["s2"].copy())

    if not tracking:
        net._fused_prev = None
        return Tensor(final["u3"])

    prev_node = net._fused_prev

    def backward_fn(g):
        _backward(plan, g, node)

    parents = [x] + plan.param_tensors + plan.beta_tensors
    if prev_node is not None:
        parents.append(prev_node)
    node = _StepNode.__new__(_StepNode)
    node.data = final["u3"]
    node.grad = None
    node.requires_grad = True
    node._parents = tuple(parents)
    node._backward_fn = backward_fn
    node._freed = False
    node._id = next(T._ids)
    node.states = states
    node.spike_saves = spike_saves
    node.conn_saves = conn_saves
    node.saved_in = saved_in
    node.x_tensor = x
    node.prev_node = prev_node
    node.state_grads = {}
    net._fused_prev = node
    return node
