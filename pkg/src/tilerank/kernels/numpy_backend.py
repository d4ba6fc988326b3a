"""Pure-numpy reference implementations of the ranker kernels.

Semantics contract shared with ``numba_backend``:

  * conv_forward(img, w, b) -> pre           pre-activation tape, (T, F)
  * conv_backward(img, dpre) -> (dw, db)     kernel/bias gradients
  * lstm_forward(tape, Wf, Wi, Wo, Wc, bf, bi, bo, bc)
        -> (hs, cs, af, ai, ao, ac, fg, ig, og, gg)   all (T, H)
  * lstm_backward(dh_last, tape, Wf, Wi, Wo, Wc,
                  af, ai, ao, ac, fg, ig, og, gg, cs, hs)
        -> (dWf, dWi, dWo, dWc, dbf, dbi, dbo, dbc, dtape)

Gates use the hard sigmoid clamp(0.2x + 0.5, 0, 1); its derivative (and
ReLU's) is taken as 0 exactly at the kinks. Gate weight matrices are
(H, F+H) with the tape input occupying the first F columns and the
recurrent state the rest.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def hard_sigmoid(x: np.ndarray) -> np.ndarray:
    return np.clip(0.2 * x + 0.5, 0.0, 1.0)


def hard_sigmoid_grad(x: np.ndarray) -> np.ndarray:
    return np.where((x > -2.5) & (x < 2.5), 0.2, 0.0)


def conv_forward(img: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full-height valid correlation along the segment axis, stride 1."""
    k = w.shape[2]
    # windows[u, t, c, v] == img[u, t + v, c]
    windows = sliding_window_view(img, k, axis=1)
    return np.einsum("utcv,fuvc->tf", windows, w) + b


def conv_backward(img: np.ndarray, dpre: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = img.shape[1] - dpre.shape[0] + 1
    windows = sliding_window_view(img, k, axis=1)
    dw = np.einsum("tf,utcv->fuvc", dpre, windows)
    db = dpre.sum(axis=0)
    return dw, db


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
        x = tape[t]
        af[t] = wf[:, :n_in] @ x + wf[:, n_in:] @ h_prev + bf
        ai[t] = wi[:, :n_in] @ x + wi[:, n_in:] @ h_prev + bi
        ao[t] = wo[:, :n_in] @ x + wo[:, n_in:] @ h_prev + bo
        ac[t] = wc[:, :n_in] @ x + wc[:, n_in:] @ h_prev + bc
        fg[t] = hard_sigmoid(af[t])
        ig[t] = hard_sigmoid(ai[t])
        og[t] = hard_sigmoid(ao[t])
        gg[t] = np.tanh(ac[t])
        cs[t] = fg[t] * c_prev + ig[t] * gg[t]
        hs[t] = og[t] * np.tanh(cs[t])
        h_prev = hs[t]
        c_prev = cs[t]
    return hs, cs, af, ai, ao, ac, fg, ig, og, gg


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
    dc = np.zeros(h_dim)
    for t in range(t_len - 1, -1, -1):
        h_prev = hs[t - 1] if t > 0 else np.zeros(h_dim)
        c_prev = cs[t - 1] if t > 0 else np.zeros(h_dim)
        tc = np.tanh(cs[t])
        do = dh * tc
        dct = dc + dh * og[t] * (1.0 - tc * tc)
        df = dct * c_prev
        di = dct * gg[t]
        dg = dct * ig[t]
        dc = dct * fg[t]
        daf = df * hard_sigmoid_grad(af[t])
        dai = di * hard_sigmoid_grad(ai[t])
        dao = do * hard_sigmoid_grad(ao[t])
        dac = dg * (1.0 - gg[t] * gg[t])
        xh = np.concatenate((tape[t], h_prev))
        dwf += np.outer(daf, xh)
        dwi += np.outer(dai, xh)
        dwo += np.outer(dao, xh)
        dwc += np.outer(dac, xh)
        dbf += daf
        dbi += dai
        dbo += dao
        dbc += dac
        dtape[t] = (
            wf[:, :n_in].T @ daf
            + wi[:, :n_in].T @ dai
            + wo[:, :n_in].T @ dao
            + wc[:, :n_in].T @ dac
        )
        dh = (
            wf[:, n_in:].T @ daf
            + wi[:, n_in:].T @ dai
            + wo[:, n_in:].T @ dao
            + wc[:, n_in:].T @ dac
        )
    return dwf, dwi, dwo, dwc, dbf, dbi, dbo, dbc, dtape
