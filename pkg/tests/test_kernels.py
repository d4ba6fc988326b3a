"""Backend parity: the numba kernels and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from tilerank.kernels import numba_backend as nb
from tilerank.kernels import numpy_backend as npb


def random_setup(seed, n_q=5, n_b=30, k=4, filters=3, hidden=3):
    rng = np.random.default_rng(seed)
    img = np.where(
        rng.random((n_q, n_b, 3)) < 0.4, rng.uniform(0, 6, (n_q, n_b, 3)), 0.0
    )
    w = rng.uniform(-0.3, 0.3, (filters, n_q, k, 3))
    b = rng.uniform(-0.1, 0.1, filters)
    gates_w = [rng.uniform(-0.4, 0.4, (hidden, filters + hidden)) for _ in range(4)]
    gates_b = [rng.uniform(-0.2, 0.2, hidden) for _ in range(4)]
    return img, w, b, gates_w, gates_b


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("k", [1, 3, 10])
def test_conv_forward_parity(seed, k):
    img, w, b, _, _ = random_setup(seed, k=k)
    np.testing.assert_allclose(
        nb.conv_forward(img, w, b), npb.conv_forward(img, w, b), atol=1e-12
    )


@pytest.mark.parametrize("seed", [0, 1])
def test_conv_backward_parity(seed):
    img, w, b, _, _ = random_setup(seed)
    pre = npb.conv_forward(img, w, b)
    dpre = np.random.default_rng(seed + 100).normal(size=pre.shape)
    dw_a, db_a = nb.conv_backward(img, dpre)
    dw_b, db_b = npb.conv_backward(img, dpre)
    np.testing.assert_allclose(dw_a, dw_b, atol=1e-12)
    np.testing.assert_allclose(db_a, db_b, atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_lstm_parity(seed):
    img, w, b, gates_w, gates_b = random_setup(seed)
    tape = np.maximum(npb.conv_forward(img, w, b), 0.0)
    out_a = nb.lstm_forward(tape, *gates_w, *gates_b)
    out_b = npb.lstm_forward(tape, *gates_w, *gates_b)
    for x, y in zip(out_a, out_b):
        np.testing.assert_allclose(x, y, atol=1e-12)
    hs, cs, af, ai, ao, ac, fg, ig, og, gg = out_a
    dh = np.random.default_rng(seed + 7).normal(size=hs.shape[1])
    grads_a = nb.lstm_backward(dh, tape, *gates_w, af, ai, ao, ac, fg, ig, og, gg, cs, hs)
    grads_b = npb.lstm_backward(dh, tape, *gates_w, af, ai, ao, ac, fg, ig, og, gg, cs, hs)
    for x, y in zip(grads_a, grads_b):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_lstm_gate_values_bounded():
    img, w, b, gates_w, gates_b = random_setup(0)
    tape = np.maximum(npb.conv_forward(img, w, b), 0.0)
    _, _, _, _, _, _, fg, ig, og, _ = npb.lstm_forward(tape, *gates_w, *gates_b)
    for gate in (fg, ig, og):
        assert np.all(gate >= 0.0) and np.all(gate <= 1.0)


def test_hard_sigmoid_definition():
    x = np.array([-20.0, -2.5, -1.0, 0.0, 1.0, 2.5, 20.0])
    np.testing.assert_allclose(
        npb.hard_sigmoid(x), [0.0, 0.0, 0.3, 0.5, 0.7, 1.0, 1.0]
    )
    # derivative is zero at and beyond the clamp kinks
    np.testing.assert_allclose(
        npb.hard_sigmoid_grad(x), [0.0, 0.0, 0.2, 0.2, 0.2, 0.0, 0.0]
    )


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("TILERANK_BACKEND", None)
    else:
        env["TILERANK_BACKEND"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from tilerank import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("numpy") == "numpy"
    assert _backend_in_subprocess("numba") == "numba"
    assert _backend_in_subprocess(None) == "numba"


def test_env_flag_rejects_unknown():
    env = dict(os.environ, TILERANK_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import tilerank.kernels"],
        capture_output=True, text=True, env=env,
    )
    assert out.returncode != 0
    assert "TILERANK_BACKEND" in out.stderr
