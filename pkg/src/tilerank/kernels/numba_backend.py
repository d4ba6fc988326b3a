"""Numba-compiled ranker kernels; see ``numpy_backend`` for the contract.

Plain nested loops compiled with ``@njit(cache=True)``: the compiled
artifacts persist on disk, so only the first process pays the compile
cost. fastmath stays off to keep results reproducible and close to the
numpy path.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def conv_forward(img, w, b):
    n_filters, n_q, k, n_ch = w.shape
    t_len = img.shape[1] - k + 1
    pre = np.empty((t_len, n_filters))
    for t in range(t_len):
        for f in range(n_filters):
            acc = b[f]
            for u in range(n_q):
                for v in range(k):
                    for c in range(n_ch):
                        acc += w[f, u, v, c] * img[u, t + v, c]
            pre[t, f] = acc
    return pre


@njit(cache=True)
def conv_backward(img, dpre):
    n_q, n_b, n_ch = img.shape
    t_len, n_filters = dpre.shape
    k = n_b - t_len + 1
    dw = np.zeros((n_filters, n_q, k, n_ch))
    db = np.zeros(n_filters)
    for t in range(t_len):
        for f in range(n_filters):
            g = dpre[t, f]
            db[f] += g
            if g != 0.0:
                for u in range(n_q):
                    for v in range(k):
                        for c in range(n_ch):
                            dw[f, u, v, c] += g * img[u, t + v, c]
    return dw, db


@njit(cache=True, inline="always")
def _hard_sigmoid(x):
    y = 0.2 * x + 0.5
    if y < 0.0:
        return 0.0
    if y > 1.0:
        return 1.0
    return y


@njit(cache=True, inline="always")
def _hard_sigmoid_grad(x):
    if -2.5 < x < 2.5:
        return 0.2
    return 0.0


@njit(cache=True)
def lstm_forward(tape, wf, wi, wo, wc, bf, bi, bo, bc):
    t_len, n_in = tape.shape
    h_dim = bf.shape[0]
    af = np.empty((t_len, h_dim))
    ai = np.empty((t_len, h_dim))
    ao = np.empty((t_len, h_dim))
    ac = np.empty((t_len, h_dim))
    fg = np.empty((t_len, h_dim))
    ig = np.empty((t_len, h_dim))
    og = np.empty((t_len, h_dim))
    gg = np.empty((t_len, h_dim))
    cs = np.empty((t_len, h_dim))
    hs = np.empty((t_len, h_dim))
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in range(t_len):
        for j in range(h_dim):
            sf = bf[j]
            si = bi[j]
            so = bo[j]
            sc = bc[j]
            for m in range(n_in):
                x = tape[t, m]
                sf += wf[j, m] * x
                si += wi[j, m] * x
                so += wo[j, m] * x
                sc += wc[j, m] * x
            for m in range(h_dim):
                hp = h_prev[m]
                sf += wf[j, n_in + m] * hp
                si += wi[j, n_in + m] * hp
                so += wo[j, n_in + m] * hp
                sc += wc[j, n_in + m] * hp
            af[t, j] = sf
            ai[t, j] = si
            ao[t, j] = so
            ac[t, j] = sc
            fv = _hard_sigmoid(sf)
            iv = _hard_sigmoid(si)
            ov = _hard_sigmoid(so)
            gv = math.tanh(sc)
            fg[t, j] = fv
            ig[t, j] = iv
            og[t, j] = ov
            gg[t, j] = gv
            cs[t, j] = fv * c_prev[j] + iv * gv
            hs[t, j] = ov * math.tanh(cs[t, j])
        for j in range(h_dim):
            h_prev[j] = hs[t, j]
            c_prev[j] = cs[t, j]
    return hs, cs, af, ai, ao, ac, fg, ig, og, gg


@njit(cache=True)
def lstm_backward(dh_last, tape, wf, wi, wo, wc, af, ai, ao, ac, fg, ig, og, gg, cs, hs):
    t_len, n_in = tape.shape
    h_dim = dh_last.shape[0]
    dwf = np.zeros_like(wf)
    dwi = np.zeros_like(wi)
    dwo = np.zeros_like(wo)
    dwc = np.zeros_like(wc)
    dbf = np.zeros(h_dim)
    dbi = np.zeros(h_dim)
    dbo = np.zeros(h_dim)
    dbc = np.zeros(h_dim)
    dtape = np.zeros_like(tape)
    dh = dh_last.copy()
    dh_next = np.zeros(h_dim)
    dc = np.zeros(h_dim)
    for t in range(t_len - 1, -1, -1):
        for m in range(h_dim):
            dh_next[m] = 0.0
        for j in range(h_dim):
            c_prev = cs[t - 1, j] if t > 0 else 0.0
            tc = math.tanh(cs[t, j])
            do = dh[j] * tc
            dct = dc[j] + dh[j] * og[t, j] * (1.0 - tc * tc)
            df = dct * c_prev
            di = dct * gg[t, j]
            dg = dct * ig[t, j]
            dc[j] = dct * fg[t, j]
            daf = df * _hard_sigmoid_grad(af[t, j])
            dai = di * _hard_sigmoid_grad(ai[t, j])
            dao = do * _hard_sigmoid_grad(ao[t, j])
            dac = dg * (1.0 - gg[t, j] * gg[t, j])
            dbf[j] += daf
            dbi[j] += dai
            dbo[j] += dao
            dbc[j] += dac
            for m in range(n_in):
                x = tape[t, m]
                dwf[j, m] += daf * x
                dwi[j, m] += dai * x
                dwo[j, m] += dao * x
                dwc[j, m] += dac * x
                dtape[t, m] += wf[j, m] * daf + wi[j, m] * dai + wo[j, m] * dao + wc[j, m] * dac
            for m in range(h_dim):
                hp = hs[t - 1, m] if t > 0 else 0.0
                dwf[j, n_in + m] += daf * hp
                dwi[j, n_in + m] += dai * hp
                dwo[j, n_in + m] += dao * hp
                dwc[j, n_in + m] += dac * hp
                dh_next[m] += (
                    wf[j, n_in + m] * daf
                    + wi[j, n_in + m] * dai
                    + wo[j, n_in + m] * dao
                    + wc[j, n_in + m] * dac
                )
        for m in range(h_dim):
            dh[m] = dh_next[m]
    return dwf, dwi, dwo, dwc, dbf, dbi, dbo, dbc, dtape
