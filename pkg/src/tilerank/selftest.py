"""Self-contained sanity checks runnable without any data files.

Each check prints one pass/fail line; the pytest suite is the real test
surface, this exists so `tilerank selftest` can vouch for an install.
"""

from __future__ import annotations

import math

import numpy as np

from tilerank import kernels
from tilerank.corpus import CorpusStats, EmbeddingStore, QrelSet
from tilerank.evaluation import Ranking, err_at_k, ndcg_at_k, precision_at_k
from tilerank.gradcheck import grad_check
from tilerank.matrix import build_matrix
from tilerank.ranker import pairwise_loss
from tilerank.segmentation import Segment, SegmentedDocument, segment_document


def _synthetic_two_topic_text() -> str:
    rng = np.random.default_rng(7)
    vocab_a = [f"alpha{i}" for i in range(30)]
    vocab_b = [f"beta{i}" for i in range(30)]
    words = [vocab_a[rng.integers(30)] for _ in range(240)]
    words += [vocab_b[rng.integers(30)] for _ in range(240)]
    return " ".join(words)


def run_selftest(verbose: bool = True) -> int:
    checks: list[tuple[str, bool]] = []

    def check(name: str, ok: bool) -> None:
        checks.append((name, ok))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")

    doc = segment_document(_synthetic_two_topic_text())
    seam_ok = len(doc.segments) >= 2 and any(
        abs(seg.span[1] - 12) <= 1 for seg in doc.segments
    )
    check("segmentation splits a two-topic document near the seam", seam_ok)

    total = doc.total_term_counts
    conserved = sum(total.values()) == sum(s.length() for s in doc.segments)
    check("segment term counts conserve the document total", conserved)

    stats = CorpusStats(n_docs=2, df={"x": 1, "y": 2}, cf={"x": 3, "y": 4}, collection_len=7)
    emb = EmbeddingStore(dim=2, vectors={"x": np.array([0.0, 0.0])})
    tiny = SegmentedDocument(
        doc_id="d", segments=[Segment(index=1, term_counts={"x": 2, "y": 1}, span=(1, 1))]
    )
    m = build_matrix(["x", "y"], tiny, stats, emb, n_q=3, n_b=4)
    check(
        "interaction matrix conserves tf and pads with zeros",
        m.cells.shape == (3, 4, 3)
        and m.cells[0, 0, 0] == 2.0
        and m.cells[:, 1:, :].sum() == 0.0
        and m.cells[2].sum() == 0.0,
    )

    qrels = QrelSet({("q", "a"): 2, ("q", "b"): 0})
    ranking = Ranking.from_scores("q", {"a": 1.0, "b": 0.5})
    check(
        "metrics agree with hand values",
        precision_at_k(ranking, qrels, 1) == 1.0
        and abs(ndcg_at_k(ranking, qrels, 2) - 1.0) < 1e-12
        and abs(err_at_k(ranking, qrels, 1) - 0.75) < 1e-12,
    )

    check(
        "pairwise loss hits ln 2 at zero margin",
        abs(pairwise_loss(1.0, 1.0) - math.log(2.0)) < 1e-12
        and pairwise_loss(1000.0, 0.0) < 1e-9,
    )

    report = grad_check(seed=0)
    check(
        f"gradient check ({kernels.BACKEND} backend): "
        f"max rel err {report.max_rel_error:.2e}",
        report.passed(),
    )

    failures = sum(1 for _, ok in checks if not ok)
    if verbose:
        print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return failures
