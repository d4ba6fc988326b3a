"""Multi-granularity neural ranker over interaction matrices.

Architecture: one CNN per kernel width k = 1..max_width, each sliding a
full-height (n_q) x k x 3 kernel along the segment axis into a ReLU
"tape"; one LSTM per width consuming its tape step by step (hard-sigmoid
gates, tanh candidate/output); an MLP over the concatenated final hidden
states producing a scalar relevance score. Training uses a pairwise
logistic loss over (positive, negative) document pairs, Adam, and L2 on
the CNN weights only.

The backward pass is hand-derived for this fixed architecture; the
per-width CNN/LSTM loops run through ``tilerank.kernels`` (numba or
numpy, see that module). Everything is float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from tilerank import kernels
from tilerank.matrix import InteractionMatrix

CHECKPOINT_FORMAT = "tilerank-checkpoint"
CHECKPOINT_VERSION = 1

INIT_SCALE = 0.1  # parameters start uniform in [-INIT_SCALE, INIT_SCALE]


@dataclass(frozen=True)
class Hyperparams:
    """Everything the training loop needs beyond the data itself."""

    max_width: int = 10  # CNN kernel widths run 1..max_width
    filters: int = 3  # filters per kernel width
    hidden: int = 3  # LSTM units per width
    mlp_sizes: tuple[int, ...] = (32, 16)
    learning_rate: float = 1e-3
    l2_coefficient: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    patience: int = 5
    max_epochs: int = 200
    seed: int = 0
    # Added to every forget-gate bias after the uniform init so memory
    # survives the padded tail of short documents (f = 0.7 per step at 1.0
    # under the hard sigmoid, versus 0.5 with a zero-centered init).
    forget_bias_init: float = 1.0

    def __post_init__(self):
        if self.max_width < 1 or self.filters < 1 or self.hidden < 1:
            raise ValueError("max_width, filters, and hidden must all be >= 1")
        if self.learning_rate <= 0 or self.adam_epsilon <= 0:
            raise ValueError("rates must be positive")
        object.__setattr__(self, "mlp_sizes", tuple(self.mlp_sizes))


# (TREC-web-style, LETOR-style) capacity profiles from the experiment setup.
PROFILES = {
    "trec": {"filters": 3, "hidden": 3, "mlp_sizes": (32, 16)},
    "letor": {"filters": 9, "hidden": 9, "mlp_sizes": (128, 16)},
}


def _build_layout(hyper: Hyperparams, n_q: int) -> list[tuple[str, tuple[int, ...]]]:
    layout: list[tuple[str, tuple[int, ...]]] = []
    f, h = hyper.filters, hyper.hidden
    for k in range(1, hyper.max_width + 1):
        layout.append((f"cnn{k}_w", (f, n_q, k, 3)))
        layout.append((f"cnn{k}_b", (f,)))
    for k in range(1, hyper.max_width + 1):
        for gate in ("f", "i", "o", "c"):
            layout.append((f"lstm{k}_w{gate}", (h, f + h)))
        for gate in ("f", "i", "o", "c"):
            layout.append((f"lstm{k}_b{gate}", (h,)))
    widths = [hyper.max_width * h, *hyper.mlp_sizes, 1]
    for i in range(len(widths) - 1):
        layout.append((f"mlp{i}_w", (widths[i + 1], widths[i])))
        layout.append((f"mlp{i}_b", (widths[i + 1],)))
    return layout


class RankerModel:
    """All learnable parameters, stored in one flat float64 vector.

    Named tensors are views into ``flat``, so optimizer updates on the
    flat vector are visible through the views and vice versa.
    """

    def __init__(self, hyper: Hyperparams, n_q: int, n_b: int, flat: np.ndarray | None = None):
        if hyper.max_width > n_b:
            raise ValueError(
                f"max kernel width {hyper.max_width} exceeds segment axis n_b={n_b}"
            )
        self.hyper = hyper
        self.n_q = n_q
        self.n_b = n_b
        self.layout = _build_layout(hyper, n_q)
        self.size = sum(int(np.prod(shape)) for _, shape in self.layout)
        if flat is None:
            flat = np.zeros(self.size, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ValueError(f"flat vector has size {flat.shape}, expected ({self.size},)")
        self.flat = np.ascontiguousarray(flat, dtype=np.float64)
        self._slices: dict[str, slice] = {}
        offset = 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            self._slices[name] = slice(offset, offset + n)
            offset += n
        self.params = self.views_of(self.flat)
        # L2 applies to the CNN (first-layer) weights only, never biases.
        self.cnn_weight_slices = [
            self._slices[f"cnn{k}_w"] for k in range(1, hyper.max_width + 1)
        ]

    def views_of(self, vec: np.ndarray) -> dict[str, np.ndarray]:
        """Named reshaped views into any vector laid out like ``flat``."""
        out = {}
        for name, shape in self.layout:
            out[name] = vec[self._slices[name]].reshape(shape)
        return out

    def copy(self) -> "RankerModel":
        return RankerModel(self.hyper, self.n_q, self.n_b, self.flat.copy())


def init_model(
    hyper: Hyperparams, n_q: int, n_b: int, rng: np.random.Generator
) -> RankerModel:
    model = RankerModel(hyper, n_q, n_b)
    model.flat[:] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=model.size)
    for k in range(1, hyper.max_width + 1):
        model.params[f"lstm{k}_bf"] += hyper.forget_bias_init
    return model


def _as_cells(matrix) -> np.ndarray:
    cells = matrix.cells if isinstance(matrix, InteractionMatrix) else matrix
    return np.ascontiguousarray(cells, dtype=np.float64)


def _forward(model: RankerModel, img: np.ndarray):
    """Score plus the caches the backward pass needs."""
    hyper = model.hyper
    p = model.params
    h = hyper.hidden
    feats = np.empty(hyper.max_width * h)
    width_caches = []
    for k in range(1, hyper.max_width + 1):
        pre = kernels.conv_forward(img, p[f"cnn{k}_w"], p[f"cnn{k}_b"])
        tape = np.maximum(pre, 0.0)
        lstm_cache = kernels.lstm_forward(
            tape,
            p[f"lstm{k}_wf"], p[f"lstm{k}_wi"], p[f"lstm{k}_wo"], p[f"lstm{k}_wc"],
            p[f"lstm{k}_bf"], p[f"lstm{k}_bi"], p[f"lstm{k}_bo"], p[f"lstm{k}_bc"],
        )
        feats[(k - 1) * h : k * h] = lstm_cache[0][-1]  # final hidden state
        width_caches.append((pre, tape, lstm_cache))
    mlp_caches = []
    act = feats
    n_layers = len(hyper.mlp_sizes) + 1
    for i in range(n_layers):
        pre = p[f"mlp{i}_w"] @ act + p[f"mlp{i}_b"]
        mlp_caches.append((act, pre))
        act = np.maximum(pre, 0.0) if i < n_layers - 1 else pre
    score_value = float(act[0])
    return score_value, (feats, width_caches, mlp_caches)


def score(matrix, model: RankerModel) -> float:
    """Deterministic relevance score of one interaction matrix."""
    img = _as_cells(matrix)
    if img.shape != (model.n_q, model.n_b, 3):
        raise ValueError(
            f"matrix shape {img.shape} does not match model ({model.n_q}, {model.n_b}, 3)"
        )
    return _forward(model, img)[0]


def _backward(model: RankerModel, img: np.ndarray, caches, upstream: float, grad: np.ndarray):
    """Accumulate upstream * d(score)/d(theta) into ``grad`` (same layout as flat)."""
    hyper = model.hyper
    p = model.params
    g = model.views_of(grad)
    feats, width_caches, mlp_caches = caches
    h = hyper.hidden
    n_layers = len(hyper.mlp_sizes) + 1
    d_act = np.array([upstream])
    for i in range(n_layers - 1, -1, -1):
        act_in, pre = mlp_caches[i]
        d_pre = d_act if i == n_layers - 1 else d_act * (pre > 0.0)
        g[f"mlp{i}_w"] += np.outer(d_pre, act_in)
        g[f"mlp{i}_b"] += d_pre
        d_act = p[f"mlp{i}_w"].T @ d_pre
    d_feats = d_act
    for k in range(1, hyper.max_width + 1):
        pre, tape, lstm_cache = width_caches[k - 1]
        hs, cs, af, ai, ao, ac, fg, ig, og, gg = lstm_cache
        dh_last = np.ascontiguousarray(d_feats[(k - 1) * h : k * h])
        dwf, dwi, dwo, dwc, dbf, dbi, dbo, dbc, dtape = kernels.lstm_backward(
            dh_last, tape,
            p[f"lstm{k}_wf"], p[f"lstm{k}_wi"], p[f"lstm{k}_wo"], p[f"lstm{k}_wc"],
            af, ai, ao, ac, fg, ig, og, gg, cs, hs,
        )
        g[f"lstm{k}_wf"] += dwf
        g[f"lstm{k}_wi"] += dwi
        g[f"lstm{k}_wo"] += dwo
        g[f"lstm{k}_wc"] += dwc
        g[f"lstm{k}_bf"] += dbf
        g[f"lstm{k}_bi"] += dbi
        g[f"lstm{k}_bo"] += dbo
        g[f"lstm{k}_bc"] += dbc
        d_pre = dtape * (pre > 0.0)
        dw, db = kernels.conv_backward(img, d_pre)
        g[f"cnn{k}_w"] += dw
        g[f"cnn{k}_b"] += db


def pairwise_loss(s_pos: float, s_neg: float) -> float:
    """ln(1 + exp(-(s_pos - s_neg))), overflow-safe for any finite inputs."""
    return float(np.logaddexp(0.0, -(s_pos - s_neg)))


def _loss_gradient_wrt_delta(delta: float) -> float:
    """d/d(delta) of ln(1 + exp(-delta)) = -sigmoid(-delta), computed stably."""
    if delta >= 0.0:
        e = math.exp(-delta)
        return -e / (1.0 + e)
    return -1.0 / (1.0 + math.exp(delta))


def l2_penalty(model: RankerModel) -> float:
    """0.5 * lambda * ||CNN weights||^2; biases and later layers are exempt."""
    lam = model.hyper.l2_coefficient
    if lam == 0.0:
        return 0.0
    total = sum(float(np.sum(model.flat[sl] ** 2)) for sl in model.cnn_weight_slices)
    return 0.5 * lam * total


def penalized_pair_loss(model: RankerModel, matrix_pos, matrix_neg) -> float:
    """Pairwise loss on one (positive, negative) pair plus the L2 penalty."""
    s_pos = score(matrix_pos, model)
    s_neg = score(matrix_neg, model)
    return pairwise_loss(s_pos, s_neg) + l2_penalty(model)


def gradients(model: RankerModel, matrix_pos, matrix_neg) -> tuple[np.ndarray, float]:
    """Exact reverse-mode gradient of the penalized pairwise loss.

    Returns a vector laid out like ``model.flat`` (use ``model.views_of``
    for named tensors) and the loss value it differentiates.
    """
    img_pos = _as_cells(matrix_pos)
    img_neg = _as_cells(matrix_neg)
    s_pos, caches_pos = _forward(model, img_pos)
    s_neg, caches_neg = _forward(model, img_neg)
    delta = s_pos - s_neg
    loss = pairwise_loss(s_pos, s_neg)
    d_delta = _loss_gradient_wrt_delta(delta)
    grad = np.zeros(model.size, dtype=np.float64)
    _backward(model, img_pos, caches_pos, d_delta, grad)
    _backward(model, img_neg, caches_neg, -d_delta, grad)
    lam = model.hyper.l2_coefficient
    if lam != 0.0:
        for sl in model.cnn_weight_slices:
            grad[sl] += lam * model.flat[sl]
    return grad, loss + l2_penalty(model)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def for_model(cls, model: RankerModel) -> "AdamState":
        return cls(m=np.zeros(model.size), v=np.zeros(model.size))


def adam_step(
    model: RankerModel, grads: np.ndarray, state: AdamState, hyper: Hyperparams
) -> tuple[RankerModel, AdamState]:
    """One Adam update with bias correction; mutates model and state in place."""
    state.t += 1
    b1, b2 = hyper.adam_beta1, hyper.adam_beta2
    state.m = b1 * state.m + (1.0 - b1) * grads
    state.v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    model.flat -= hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.adam_epsilon)
    return model, state


def save_model(model: RankerModel, path) -> None:
    """Write the checkpoint: one JSON header line, then raw little-endian float64.

    The byte stream is a pure function of the model, so identical models
    produce identical files.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyperparams": asdict(model.hyper),
        "n_q": model.n_q,
        "n_b": model.n_b,
        "tensors": [
            {"name": name, "shape": list(shape), "dtype": "<f8"}
            for name, shape in model.layout
        ],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(model.flat, dtype="<f8").tobytes())


def load_model(path) -> RankerModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a ranker checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: checkpoint version {header.get('version')} unsupported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    hp = dict(header["hyperparams"])
    hp["mlp_sizes"] = tuple(hp["mlp_sizes"])
    hyper = Hyperparams(**hp)
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    model = RankerModel(hyper, header["n_q"], header["n_b"], flat)
    stored = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
    if stored != [(n, tuple(s)) for n, s in model.layout]:
        raise ValueError(f"{path}: tensor layout does not match hyperparameters")
    return model
