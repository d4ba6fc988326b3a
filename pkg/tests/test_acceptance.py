"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The heavier end-to-end criteria (7, 8) train real models over ten
seeds on the bundled smoke corpus and take a few minutes combined.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from oracles import oracle_err, oracle_ndcg, oracle_precision
from tilerank.cli import main
from tilerank.corpus import QrelSet
from tilerank.evaluation import Ranking, err_at_k, evaluate_run, ndcg_at_k, precision_at_k
from tilerank.gradcheck import grad_check
from tilerank.matrix import build_matrix
from tilerank.ranker import Hyperparams
from tilerank.segmentation import segment_document
from tilerank.training import pairwise_accuracy, train


def report(number, ok, detail):
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# --------------------------------------------------------------------------
# 1. gradient correctness

def test_criterion_1_gradient_correctness():
    start = time.monotonic()
    result = grad_check(seed=0, epsilon=1e-5)
    elapsed = time.monotonic() - start
    ok = result.max_rel_error < 1e-4 and elapsed < 60.0
    report(1, ok, f"max rel error {result.max_rel_error:.3e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. overfit harness

def overfit_triples(n=30, n_q=3, n_b=30, seed=42):
    """Positives concentrate query-term mass in >=3 consecutive segments;
    negatives scatter a similar mass."""
    from tilerank.corpus import TrainingTriple

    rng = np.random.default_rng(seed)
    matrices = {}
    triples = []
    for i in range(n):
        qid = f"q{i}"
        pos = np.zeros((n_q, n_b, 3))
        start = int(rng.integers(0, n_b - 5))
        run = int(rng.integers(3, 6))
        for row in range(n_q):
            for col in range(start, start + run):
                pos[row, col] = (int(rng.integers(2, 6)), 2.0, 1.0)
        neg = np.zeros((n_q, n_b, 3))
        for row in range(n_q):
            for col in rng.choice(n_b, size=4, replace=False):
                neg[row, col] = (int(rng.integers(1, 3)), 2.0, rng.uniform(0.2, 0.6))
        matrices[(qid, "pos")] = pos
        matrices[(qid, "neg")] = neg
        triples.append(TrainingTriple(qid, "pos", "neg"))
    return triples, matrices


def test_criterion_2_overfit_harness():
    start = time.monotonic()
    triples, matrices = overfit_triples()
    hyper = Hyperparams(learning_rate=1e-3, max_epochs=200, patience=200, seed=0)
    model, history = train(
        triples, lambda q, d: matrices[(q, d)], hyper, validation_split=0.0
    )
    elapsed = time.monotonic() - start
    accuracy = pairwise_accuracy(model, triples, matrices)
    final_loss = history[-1].train_loss
    ok = accuracy == 1.0 and final_loss < 0.05 and len(history) == 200 and elapsed < 120.0
    report(2, ok, f"accuracy {accuracy:.2f}, loss {final_loss:.4f}, {elapsed:.0f}s")


# --------------------------------------------------------------------------
# 3. segmentation seam recovery

def test_criterion_3_segmentation_oracle():
    rng = np.random.default_rng(2024)
    alpha, beta = 20, 6
    found = total = 0
    for _ in range(50):
        n_blocks = int(rng.integers(2, 5))
        words, seams = [], []
        for b in range(n_blocks):
            vocab = [f"block{b}term{i}" for i in range(25)]
            n_seq = int(rng.integers(12, 18))
            words.extend(vocab[rng.integers(25)] for _ in range(n_seq * alpha))
            if b < n_blocks - 1:
                seams.append(len(words) // alpha)
        doc = segment_document(" ".join(words), alpha=alpha, beta=beta)
        boundaries = {seg.span[1] for seg in doc.segments[:-1]}
        for seam in seams:
            total += 1
            found += any(abs(b - seam) <= 1 for b in boundaries)
    rate = found / total
    report(3, rate >= 0.9, f"{found}/{total} seams within +-1 gap ({rate:.1%})")


# --------------------------------------------------------------------------
# 4. tf conservation

def test_criterion_4_tf_conservation():
    from tilerank.corpus import CorpusStats, EmbeddingStore
    from tilerank.segmentation import Segment, SegmentedDocument

    rng = np.random.default_rng(7)
    vocab = [f"t{i}" for i in range(12)]
    stats = CorpusStats(
        n_docs=20, df={t: int(rng.integers(1, 20)) for t in vocab},
        cf={t: 5 for t in vocab}, collection_len=1000,
    )
    embeddings = EmbeddingStore(
        dim=3, vectors={t: rng.normal(size=3) for t in vocab[:8]}
    )
    n_q, n_b = 5, 30
    exact = 0
    for trial in range(100):
        n_segments = int(rng.integers(1, 75)) if trial % 3 else int(rng.integers(31, 90))
        segments = []
        for j in range(n_segments):
            counts = {
                vocab[rng.integers(12)]: int(rng.integers(1, 6))
                for _ in range(int(rng.integers(1, 5)))
            }
            segments.append(Segment(index=j + 1, term_counts=counts, span=(j + 1, j + 1)))
        doc = SegmentedDocument(doc_id=f"d{trial}", segments=segments)
        query = [vocab[rng.integers(12)] for _ in range(int(rng.integers(1, 6)))]
        matrix = build_matrix(query, doc, stats, embeddings, n_q=n_q, n_b=n_b)
        totals = doc.total_term_counts
        squery = query[:n_q]
        row_ok = all(
            matrix.tf()[i].sum() == float(totals.get(term, 0))
            for i, term in enumerate(squery)
        )
        pad_ok = all(
            matrix.tf()[i].sum() == 0.0 for i in range(len(squery), n_q)
        )
        exact += row_ok and pad_ok
    report(4, exact == 100, f"{exact}/100 matrices conserve tf exactly")


# --------------------------------------------------------------------------
# 5. metric oracle equivalence

def test_criterion_5_metric_oracle():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        n_docs = int(rng.integers(1, 50))
        doc_ids = [f"d{i}" for i in range(n_docs)]
        grades = {}
        judged = []
        for d in doc_ids:
            if rng.random() < 0.6:
                g = int(rng.integers(0, 4))
                grades[("q", d)] = g
                judged.append(g)
        qrels = QrelSet(grades)
        order = list(rng.permutation(doc_ids))
        ranking = Ranking.from_scores(
            "q", {d: float(n_docs - i) for i, d in enumerate(order)}
        )
        ranked_grades = [grades.get(("q", d), 0) for d in order]
        g_max = max((g for g in judged if g > 0), default=0)
        for k in (1, 5, 10, 20):
            worst = max(
                worst,
                abs(precision_at_k(ranking, qrels, k) - oracle_precision(ranked_grades, k)),
                abs(ndcg_at_k(ranking, qrels, k) - oracle_ndcg(ranked_grades, judged, k)),
                abs(err_at_k(ranking, qrels, k) - oracle_err(ranked_grades, g_max, k)),
            )
    report(5, worst < 1e-9, f"worst |difference| {worst:.2e} over 1000 rankings")


# --------------------------------------------------------------------------
# 6-9: smoke-corpus pipeline

def read_run(path):
    per_query = {}
    for line in Path(path).read_text().splitlines():
        qid, _, doc_id, _, score_str, _ = line.split()
        per_query.setdefault(qid, {})[doc_id] = float(score_str)
    return [Ranking.from_scores(q, s) for q, s in sorted(per_query.items())]


def test_criterion_6_baseline_sanity(smoke_paths, smoke_index, smoke_data, tmp_path):
    qrels = smoke_data["qrels"]
    # oracle-checked optimum: the ideal ordering reaches nDCG@5 = 1 per query
    for qid in qrels.query_ids():
        judged = qrels.judged_docs(qid)
        ideal = sorted(judged, key=lambda d: -max(judged[d], 0))
        grades = [max(judged[d], 0) for d in ideal]
        assert oracle_ndcg(grades, list(judged.values()), 5) == pytest.approx(1.0)
        ranking = Ranking.from_scores(
            qid, {d: float(len(ideal) - i) for i, d in enumerate(ideal)}
        )
        assert ndcg_at_k(ranking, qrels, 5) == pytest.approx(1.0)
    optimum = 1.0

    means = {}
    for baseline in ("bm25", "lm"):
        out = tmp_path / baseline
        assert main([
            "rank", "--index", str(smoke_index),
            "--queries", str(smoke_paths["queries"]),
            "--baseline", baseline, "--out", str(out),
        ]) == 0
        rankings = read_run(out / f"run.{baseline}.txt")
        means[baseline] = evaluate_run(rankings, qrels, (5,)).means["ndcg@5"]
    ok = all(m >= 0.9 * optimum for m in means.values())
    report(6, ok, f"mean ndcg@5 bm25 {means['bm25']:.3f}, lm {means['lm']:.3f} "
                  f"(optimum {optimum:.1f})")


def run_smoke_pipeline(smoke_paths, smoke_index, out_root, seed, w2w=False,
                       triples=20, epochs=15):
    """CLI train + rank + evaluate for one seed; returns mean ndcg@5."""
    w2w_args = (
        ["--w2w", "--corpus", str(smoke_paths["corpus"])] if w2w else []
    )
    model_dir = out_root / f"model_s{seed}"
    assert main([
        "train",
        "--index", str(smoke_index),
        "--queries", str(smoke_paths["queries"]),
        "--qrels", str(smoke_paths["qrels"]),
        "--embeddings", str(smoke_paths["embeddings"]),
        "--seed", str(seed),
        "--max-epochs", str(epochs), "--patience", str(epochs),
        "--triples-per-query", str(triples),
        "--validation-split", "0",
        *w2w_args,
        "--out", str(model_dir),
    ]) == 0
    rank_dir = out_root / f"rank_s{seed}"
    assert main([
        "rank",
        "--index", str(smoke_index),
        "--queries", str(smoke_paths["queries"]),
        "--model", str(model_dir / "model.ckpt"),
        "--embeddings", str(smoke_paths["embeddings"]),
        *w2w_args,
        "--out", str(rank_dir),
    ]) == 0
    eval_dir = out_root / f"eval_s{seed}"
    assert main([
        "evaluate", "--run", str(rank_dir / "run.tilerank.txt"),
        "--qrels", str(smoke_paths["qrels"]),
        "--cutoffs", "5",
        "--out", str(eval_dir),
    ]) == 0
    for line in (eval_dir / "report.txt").read_text().splitlines():
        parts = line.split("\t")
        if parts[0] == "ndcg@5" and parts[1] == "all":
            return float(parts[2])
    raise AssertionError("ndcg@5 missing from report")


def test_criterion_7_end_to_end_smoke(smoke_paths, smoke_data, tmp_path):
    start = time.monotonic()
    index_dir = tmp_path / "index"
    assert main([
        "index", "--corpus", str(smoke_paths["corpus"]), "--out", str(index_dir),
    ]) == 0
    neural = [
        run_smoke_pipeline(smoke_paths, index_dir, tmp_path, seed)
        for seed in range(10)
    ]
    random_means = []
    qrels = smoke_data["qrels"]
    for seed in range(10):
        out = tmp_path / f"random_s{seed}"
        assert main([
            "rank", "--index", str(index_dir),
            "--queries", str(smoke_paths["queries"]),
            "--baseline", "random", "--seed", str(seed),
            "--out", str(out),
        ]) == 0
        rankings = read_run(out / "run.random.txt")
        random_means.append(evaluate_run(rankings, qrels, (5,)).means["ndcg@5"])
    elapsed = time.monotonic() - start
    neural_mean = float(np.mean(neural))
    random_mean = float(np.mean(random_means))
    ok = elapsed < 300.0 and neural_mean > random_mean + 0.15
    report(7, ok, f"neural {neural_mean:.3f} vs random {random_mean:.3f}, {elapsed:.0f}s")


def test_criterion_8_ablation_direction(smoke_paths, smoke_index, smoke_data, tmp_path):
    """Segment-level matching should not lose to word-level matching on a
    corpus with spam-style repeats and scattered-mention documents."""
    wins = 0
    pairs = []
    for seed in range(10):
        w2s = run_smoke_pipeline(smoke_paths, smoke_index, tmp_path, seed, w2w=False)
        w2w = run_smoke_pipeline(
            smoke_paths, smoke_index, tmp_path / "w2w", seed, w2w=True
        )
        wins += w2s >= w2w
        pairs.append((w2s, w2w))
    detail = ", ".join(f"{a:.2f}/{b:.2f}" for a, b in pairs)
    report(8, wins >= 7, f"w2s>=w2w in {wins}/10 seeds [{detail}]")


def test_criterion_9_determinism(smoke_paths, tmp_path):
    digests = []
    for replica in ("r1", "r2"):
        root = tmp_path / replica
        index_dir = root / "index"
        assert main([
            "index", "--corpus", str(smoke_paths["corpus"]), "--out", str(index_dir),
        ]) == 0
        model_dir = root / "model"
        assert main([
            "train", "--index", str(index_dir),
            "--queries", str(smoke_paths["queries"]),
            "--qrels", str(smoke_paths["qrels"]),
            "--embeddings", str(smoke_paths["embeddings"]),
            "--seed", "3", "--max-epochs", "3", "--patience", "3",
            "--validation-split", "0",
            "--out", str(model_dir),
        ]) == 0
        rank_dir = root / "rank"
        assert main([
            "rank", "--index", str(index_dir),
            "--queries", str(smoke_paths["queries"]),
            "--model", str(model_dir / "model.ckpt"),
            "--embeddings", str(smoke_paths["embeddings"]),
            "--out", str(rank_dir),
        ]) == 0
        render_dir = root / "render"
        assert main([
            "render", "--index", str(index_dir),
            "--queries", str(smoke_paths["queries"]),
            "--embeddings", str(smoke_paths["embeddings"]),
            "--query-id", "q4", "--doc-id", "solar-01",
            "--mode", "rgb-3channel",
            "--out", str(render_dir),
        ]) == 0
        digests.append((
            (index_dir / "segments.jsonl").read_bytes(),
            (model_dir / "model.ckpt").read_bytes(),
            (rank_dir / "run.tilerank.txt").read_bytes(),
            (render_dir / "q4_solar-01.rgb-3channel.ppm").read_bytes(),
        ))
    names = ("segment cache", "checkpoint", "run file", "image")
    same = [a == b for a, b in zip(*digests)]
    ok = all(same)
    report(9, ok, "byte-identical: " + ", ".join(
        f"{n}={'yes' if s else 'NO'}" for n, s in zip(names, same)
    ))


def test_criterion_10_renderer_goldens():
    from test_render import GOLDEN_DIR, fixture_matrices
    from tilerank.render import render

    matches = 0
    for i, (matrix, spec) in enumerate(fixture_matrices()):
        golden = (GOLDEN_DIR / f"fixture{i}.ppm").read_bytes()
        matches += render(matrix, spec) == golden
    report(10, matches == 3, f"{matches}/3 golden images byte-identical")
