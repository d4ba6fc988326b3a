"""Finite-difference verification of the hand-derived backward pass.

Builds a small random model and a random (positive, negative) matrix
pair, then compares every analytic partial derivative of the penalized
pairwise loss against a central finite difference. The relative error
uses an absolute floor of 1e-6 in the denominator so that parameters
with (near-)zero influence do not divide noise by noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tilerank.ranker import (
    Hyperparams,
    RankerModel,
    _forward,
    gradients,
    init_model,
    l2_penalty,
    pairwise_loss,
)

# Pre-activations closer than this to a ReLU/hard-sigmoid kink make the
# finite difference straddle the kink; such seeds are rejected.
KINK_MARGIN = 1e-7

GRADCHECK_HYPER = Hyperparams(
    max_width=3, filters=2, hidden=2, mlp_sizes=(8, 4), l2_coefficient=1e-4
)
GRADCHECK_N_Q = 3
GRADCHECK_N_B = 8


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    n_params: int
    epsilon: float
    min_kink_distance: float

    def passed(self, threshold: float = 1e-4) -> bool:
        return bool(self.max_rel_error < threshold)

    def summary(self) -> str:
        status = "PASS" if self.passed() else "FAIL"
        return (
            f"gradient check: max relative error {self.max_rel_error:.3e} "
            f"over {self.n_params} parameters (worst: {self.worst_param}, "
            f"eps={self.epsilon:g}, kink distance {self.min_kink_distance:.3e}) "
            f"[{status} at 1e-4]"
        )


def random_matrix(n_q: int, n_b: int, rng: np.random.Generator) -> np.ndarray:
    """Random but structurally plausible cell grid: zero padding tail,
    integer tf, presence-gated idf, similarity in [0, 1]."""
    cells = np.zeros((n_q, n_b, 3))
    real_rows = rng.integers(1, n_q + 1)
    real_cols = rng.integers(1, n_b + 1)
    tf = rng.integers(0, 5, size=(real_rows, real_cols)).astype(np.float64)
    present = tf > 0
    idf = rng.uniform(0.5, 3.5, size=tf.shape) * present
    sim = np.where(present, 1.0, rng.uniform(0.0, 1.0, size=tf.shape))
    cells[:real_rows, :real_cols, 0] = tf
    cells[:real_rows, :real_cols, 1] = idf
    cells[:real_rows, :real_cols, 2] = sim
    return cells


def _min_kink_distance(model: RankerModel, img: np.ndarray) -> float:
    """Smallest distance of any pre-activation to its nonlinearity kink."""
    _, (feats, width_caches, mlp_caches) = _forward(model, img)
    dist = np.inf
    for pre, _tape, lstm_cache in width_caches:
        dist = min(dist, float(np.min(np.abs(pre))))
        _hs, _cs, af, ai, ao, ac, *_ = lstm_cache
        for gate_pre in (af, ai, ao):
            dist = min(dist, float(np.min(np.abs(np.abs(gate_pre) - 2.5))))
        del ac
    for i, (_act, pre) in enumerate(mlp_caches):
        if i < len(mlp_caches) - 1:  # final layer is linear, no kink
            dist = min(dist, float(np.min(np.abs(pre))))
    return dist


def grad_check(
    hyper: Hyperparams = GRADCHECK_HYPER,
    seed: int = 0,
    epsilon: float = 1e-5,
    n_q: int = GRADCHECK_N_Q,
    n_b: int = GRADCHECK_N_B,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    model = init_model(hyper, n_q, n_b, rng)
    img_pos = random_matrix(n_q, n_b, rng)
    img_neg = random_matrix(n_q, n_b, rng)

    kink_distance = min(
        _min_kink_distance(model, img_pos), _min_kink_distance(model, img_neg)
    )
    if kink_distance < KINK_MARGIN:
        raise ValueError(
            f"seed {seed} places a pre-activation within {KINK_MARGIN:g} of a "
            "nonlinearity kink; pick another seed"
        )

    analytic, _ = gradients(model, img_pos, img_neg)

    def total_loss() -> float:
        s_pos, _ = _forward(model, img_pos)
        s_neg, _ = _forward(model, img_neg)
        return pairwise_loss(s_pos, s_neg) + l2_penalty(model)

    max_rel = 0.0
    worst = ""
    names = []
    for name, shape in model.layout:
        names.extend([name] * int(np.prod(shape)))
    for i in range(model.size):
        original = model.flat[i]
        model.flat[i] = original + epsilon
        up = total_loss()
        model.flat[i] = original - epsilon
        down = total_loss()
        model.flat[i] = original
        fd = (up - down) / (2.0 * epsilon)
        rel = float(abs(analytic[i] - fd) / max(abs(analytic[i]), abs(fd), 1e-6))
        if rel > max_rel:
            max_rel = rel
            worst = names[i]
    return GradCheckReport(
        max_rel_error=max_rel,
        worst_param=worst,
        n_params=model.size,
        epsilon=epsilon,
        min_kink_distance=kink_distance,
    )
