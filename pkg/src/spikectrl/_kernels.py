"""Optional numba kernels for the fused cell updates.

These fuse the elementwise arithmetic of one spiking sub-step (and its
backward) into single loops. The expressions and their evaluation order
mirror the plain-numpy implementations in fastpath.py exactly; the
equivalence tests exercise whichever path is active. Everything degrades
gracefully to numpy when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except Exception:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def alif_forward(i_p, u_p, tb_p, ta_p, drive, bm, bs, cm, ba,
                 xi, theta0, decay_step):
    batch, width = i_p.shape
    i_new = np.empty_like(i_p)
    u_new = np.empty_like(u_p)
    s_new = np.empty_like(u_p)
    tb = np.empty_like(tb_p)
    ta = np.empty_like(ta_p)
    v = np.empty_like(u_p)
    theta = np.empty_like(u_p)
    for b in range(batch):
        for j in range(width):
            ii = bs[j] * i_p[b, j] + drive[b, j]
            up = bm[j] * u_p[b, j] + cm[j] * ii
            th = tb_p[b, j] + xi * ta_p[b, j]
            vv = up - th
            s = 1.0 if vv >= 0.0 else 0.0
            i_new[b, j] = ii
            v[b, j] = vv
            theta[b, j] = th
            s_new[b, j] = s
            u_new[b, j] = up - th * s
            tb[b, j] = (tb_p[b, j] - decay_step
                        + (theta0 - tb_p[b, j]) * s)
            ta[b, j] = ba[j] * ta_p[b, j] + s
    return i_new, u_new, s_new, tb, ta, v, theta


@njit(cache=True)
def lif_forward(i_p, u_p, drive, bm, bs, cm, theta0):
    batch, width = i_p.shape
    i_new = np.empty_like(i_p)
    u_new = np.empty_like(u_p)
    s_new = np.empty_like(u_p)
    v = np.empty_like(u_p)
    for b in range(batch):
        for j in range(width):
            ii = bs[j] * i_p[b, j] + drive[b, j]
            up = bm[j] * u_p[b, j] + cm[j] * ii
            vv = up - theta0
            s = 1.0 if vv >= 0.0 else 0.0
            i_new[b, j] = ii
            v[b, j] = vv
            s_new[b, j] = s
            u_new[b, j] = up - theta0 * s
    return i_new, u_new, s_new, v


@njit(cache=True)
def alif_backward(di_n, du_n, ds_n, dtb_n, dta_n, surr, s_cur, i_cur,
                  i_p, u_p, tb_p, ta_p, theta, bm, bs, cm, ba, xi, theta0,
                  want_beta):
    batch, width = di_n.shape
    di_p = np.empty_like(di_n)
    du_p = np.empty_like(du_n)
    dtb_p = np.empty_like(dtb_n)
    dta_p = np.empty_like(dta_n)
    ddrive = np.empty_like(di_n)
    dbm = np.zeros(width, dtype=di_n.dtype)
    dbs = np.zeros(width, dtype=di_n.dtype)
    dba = np.zeros(width, dtype=di_n.dtype)
    for b in range(batch):
        for j in range(width):
            ds = (ds_n[b, j] + dta_n[b, j]
                  + dtb_n[b, j] * (theta0 - tb_p[b, j])
                  - du_n[b, j] * theta[b, j])
            dta = dta_n[b, j] * ba[j]
            dtb = dtb_n[b, j] * (1.0 - s_cur[b, j])
            dtheta = -(du_n[b, j] * s_cur[b, j])
            dv = ds * surr[b, j]
            du_pre = du_n[b, j] + dv
            dtheta -= dv
            dtb += dtheta
            dta += xi * dtheta
            di = di_n[b, j] + du_pre * cm[j]
            du_p[b, j] = du_pre * bm[j]
            di_p[b, j] = di * bs[j]
            ddrive[b, j] = di
            dtb_p[b, j] = dtb
            dta_p[b, j] = dta
            if want_beta:
                dbm[j] += du_pre * (u_p[b, j] - i_cur[b, j])
                dbs[j] += di * i_p[b, j]
                dba[j] += dta_n[b, j] * ta_p[b, j]
    return di_p, du_p, dtb_p, dta_p, ddrive, dbm, dbs, dba


@njit(cache=True)
def lif_backward(di_n, du_n, ds_n, surr, i_cur, i_p, u_p, bm, bs, cm,
                 theta0, want_beta):
    batch, width = di_n.shape
    di_p = np.empty_like(di_n)
    du_p = np.empty_like(du_n)
    ddrive = np.empty_like(di_n)
    dbm = np.zeros(width, dtype=di_n.dtype)
    dbs = np.zeros(width, dtype=di_n.dtype)
    for b in range(batch):
        for j in range(width):
            ds = ds_n[b, j] - du_n[b, j] * theta0
            dv = ds * surr[b, j]
            du_pre = du_n[b, j] + dv
            di = di_n[b, j] + du_pre * cm[j]
            du_p[b, j] = du_pre * bm[j]
            di_p[b, j] = di * bs[j]
            ddrive[b, j] = di
            if want_beta:
                dbm[j] += du_pre * (u_p[b, j] - i_cur[b, j])
                dbs[j] += di * i_p[b, j]
    return di_p, du_p, ddrive, dbm, dbs
