"""Pairwise training loop with validation-based early stopping.

Pure SGD over one triple at a time (no batching), seeded shuffling each
epoch, and a by-query validation split. The best-validation parameter
snapshot is what training returns, not the final state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from tilerank.corpus import TrainingTriple
from tilerank.ranker import (
    AdamState,
    Hyperparams,
    RankerModel,
    adam_step,
    gradients,
    init_model,
    pairwise_loss,
    score,
)

log = logging.getLogger(__name__)

MatrixProvider = Callable[[str, str], "np.ndarray"]


class EmptyTrainingData(ValueError):
    """No usable training triples."""


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def split_validation_queries(
    query_ids: Sequence[str], validation_split: float, rng: np.random.Generator
) -> set[str]:
    """Pick round(|queries| * split) query ids for validation, seeded."""
    qids = sorted(query_ids)
    n_val = int(round(len(qids) * validation_split))
    if n_val >= len(qids):
        n_val = len(qids) - 1
    if n_val <= 0:
        return set()
    picked = rng.permutation(len(qids))[:n_val]
    return {qids[i] for i in picked}


def mean_validation_loss(
    model: RankerModel, triples: Sequence[TrainingTriple], matrices: dict
) -> float:
    total = 0.0
    for t in triples:
        s_pos = score(matrices[(t.query_id, t.pos_doc_id)], model)
        s_neg = score(matrices[(t.query_id, t.neg_doc_id)], model)
        total += pairwise_loss(s_pos, s_neg)
    return total / len(triples)


def pairwise_accuracy(
    model: RankerModel, triples: Sequence[TrainingTriple], matrices: dict
) -> float:
    """Fraction of triples scored in the right order (s_pos > s_neg)."""
    correct = 0
    for t in triples:
        s_pos = score(matrices[(t.query_id, t.pos_doc_id)], model)
        s_neg = score(matrices[(t.query_id, t.neg_doc_id)], model)
        correct += s_pos > s_neg
    return correct / len(triples)


def train(
    triples: Sequence[TrainingTriple],
    matrix_provider: MatrixProvider,
    hyper: Hyperparams,
    validation_split: float = 0.1,
) -> tuple[RankerModel, list[EpochRecord]]:
    """Train a fresh model on the given triples.

    ``matrix_provider(query_id, doc_id)`` must deterministically return the
    interaction matrix (or its raw cell array) for that pair; every matrix
    is fetched once up front. Stops when validation loss has not improved
    for ``hyper.patience`` consecutive epochs, or at ``hyper.max_epochs``.
    Without a validation split the training loss drives early stopping.
    """
    triples = list(triples)
    if not triples:
        raise EmptyTrainingData("no training triples")
    rng = np.random.default_rng(hyper.seed)

    matrices: dict[tuple[str, str], np.ndarray] = {}
    for t in triples:
        for doc_id in (t.pos_doc_id, t.neg_doc_id):
            key = (t.query_id, doc_id)
            if key not in matrices:
                cells = matrix_provider(t.query_id, doc_id)
                matrices[key] = getattr(cells, "cells", cells)
    any_matrix = next(iter(matrices.values()))
    n_q, n_b, _ = any_matrix.shape

    val_qids = split_validation_queries(
        {t.query_id for t in triples}, validation_split, rng
    )
    train_triples = [t for t in triples if t.query_id not in val_qids]
    val_triples = [t for t in triples if t.query_id in val_qids]
    if not train_triples:
        train_triples, val_triples = triples, []
    log.info(
        "training on %d triples (%d queries), validating on %d triples (%d queries)",
        len(train_triples), len({t.query_id for t in train_triples}),
        len(val_triples), len(val_qids),
    )

    model = init_model(hyper, n_q, n_b, rng)
    state = AdamState.for_model(model)
    history: list[EpochRecord] = []
    best_loss = np.inf
    best_flat = model.flat.copy()
    stale_epochs = 0
    for epoch in range(1, hyper.max_epochs + 1):
        order = rng.permutation(len(train_triples))
        epoch_loss = 0.0
        for idx in order:
            t = train_triples[idx]
            grad, loss = gradients(
                model,
                matrices[(t.query_id, t.pos_doc_id)],
                matrices[(t.query_id, t.neg_doc_id)],
            )
            adam_step(model, grad, state, hyper)
            epoch_loss += loss
        train_loss = epoch_loss / len(train_triples)
        if val_triples:
            val_loss = mean_validation_loss(model, val_triples, matrices)
        else:
            val_loss = mean_validation_loss(model, train_triples, matrices)
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        if val_loss < best_loss:
            best_loss = val_loss
            best_flat = model.flat.copy()
            stale_epochs = 0
        else:
            stale_epochs += 1
        if stale_epochs >= hyper.patience:
            break
    return RankerModel(hyper, n_q, n_b, best_flat), history
