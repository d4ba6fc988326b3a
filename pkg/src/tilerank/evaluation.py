"""IR metrics, lexical baselines, cross-validation folds, and run scoring.

Metric conventions: unjudged documents count as non-relevant, negative
grades (spam labels) clamp to zero, nDCG uses exponential (2^g - 1) gains,
and ERR normalizes gains by the largest positive grade observed in the
judgment set. Queries without any relevant document are excluded from the
aggregate report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tilerank.corpus import CorpusStats, QrelSet

log = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (5, 10, 20)

BM25_K1 = 1.2
BM25_B = 0.75
DIRICHLET_MU = 2000.0


@dataclass(frozen=True)
class Ranking:
    """Documents for one query, best first.

    Order is descending score with ties broken by ascending doc id; the
    constructor enforces it regardless of input order.
    """

    query_id: str
    items: tuple[tuple[str, float], ...]

    @classmethod
    def from_scores(cls, query_id: str, scores: dict[str, float]) -> "Ranking":
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(query_id=query_id, items=tuple(ordered))

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]


@dataclass(frozen=True)
class FoldSplit:
    folds: tuple[tuple[str, ...], ...]

    def train_test(self, fold_index: int) -> tuple[set[str], set[str]]:
        test = set(self.folds[fold_index])
        train = {q for i, f in enumerate(self.folds) if i != fold_index for q in f}
        return train, test


def _clamped_grades(ranking: Ranking, qrels: QrelSet) -> list[int]:
    return [max(qrels.grade(ranking.query_id, d, 0), 0) for d in ranking.doc_ids()]


def precision_at_k(ranking: Ranking, qrels: QrelSet, k: int) -> float:
    """Fraction of the top k that is relevant (grade >= 1); short rankings
    are padded with non-relevant positions."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    grades = _clamped_grades(ranking, qrels)[:k]
    return sum(1 for g in grades if g >= 1) / k


def ndcg_at_k(ranking: Ranking, qrels: QrelSet, k: int) -> float:
    """Normalized discounted cumulative gain with 2^g - 1 gains.

    Returns 0 when the query has no relevant document (callers exclude
    such queries from aggregates).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    grades = _clamped_grades(ranking, qrels)[:k]
    dcg = sum((2.0**g - 1.0) / math.log2(i + 2) for i, g in enumerate(grades))
    judged = sorted(
        (max(g, 0) for g in qrels.judged_docs(ranking.query_id).values()), reverse=True
    )
    idcg = sum((2.0**g - 1.0) / math.log2(i + 2) for i, g in enumerate(judged[:k]))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def err_at_k(ranking: Ranking, qrels: QrelSet, k: int, g_max: int | None = None) -> float:
    """Expected reciprocal rank under the cascade model.

    Per-document stop probability is (2^g - 1) / 2^g_max where g_max is
    the largest positive grade in the judgment set (overridable for a
    fixed grading scale).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if g_max is None:
        g_max = qrels.max_positive_grade()
    if g_max <= 0:
        return 0.0
    grades = _clamped_grades(ranking, qrels)[:k]
    err = 0.0
    not_stopped = 1.0
    for i, g in enumerate(grades, start=1):
        r = (2.0**g - 1.0) / 2.0**g_max
        err += not_stopped * r / i
        not_stopped *= 1.0 - r
    return err


def bm25_score(
    query_terms: list[str],
    doc_counts: dict[str, int],
    stats: CorpusStats,
    avg_doclen: float,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """Okapi BM25 with the standard non-negative RSJ idf."""
    doclen = sum(doc_counts.values())
    total = 0.0
    for w in query_terms:
        tf = doc_counts.get(w, 0)
        if tf == 0:
            continue
        df = stats.df.get(w, 0)
        idf = math.log((stats.n_docs - df + 0.5) / (df + 0.5) + 1.0)
        norm = tf + k1 * (1.0 - b + b * doclen / avg_doclen)
        total += idf * tf * (k1 + 1.0) / norm
    return total


def lm_dirichlet_score(
    query_terms: list[str],
    doc_counts: dict[str, int],
    stats: CorpusStats,
    mu: float = DIRICHLET_MU,
) -> float:
    """Dirichlet-smoothed query log-likelihood.

    Query terms absent from the whole collection are skipped with a
    warning (their likelihood is undefined under the smoothing prior).
    """
    doclen = sum(doc_counts.values())
    total = 0.0
    for w in query_terms:
        cf = stats.cf.get(w, 0)
        if cf == 0:
            log.warning("query term %r has zero collection frequency; skipped", w)
            continue
        p_collection = cf / stats.collection_len
        numerator = doc_counts.get(w, 0) + mu * p_collection
        if numerator <= 0.0:
            total += float("-inf")
        else:
            total += math.log(numerator / (doclen + mu))
    return total


def kfold_split(query_ids: list[str], k: int, seed: int) -> FoldSplit:
    """Seeded shuffle plus round-robin assignment; fold sizes differ by <= 1."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    qids = sorted(query_ids)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(qids))
    folds: list[list[str]] = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(qids[idx])
    return FoldSplit(folds=tuple(tuple(f) for f in folds))


@dataclass
class MetricReport:
    cutoffs: tuple[int, ...]
    per_query: dict[str, dict[str, float]]  # query_id -> metric label -> value
    means: dict[str, float] = field(default_factory=dict)
    skipped_queries: list[str] = field(default_factory=list)

    def metric_labels(self) -> list[str]:
        labels = []
        for name in ("p", "ndcg", "err"):
            labels.extend(f"{name}@{k}" for k in self.cutoffs)
        return labels

    def to_text(self) -> str:
        """Tab-separated report: one line per (metric, query), then means."""
        lines = []
        for label in self.metric_labels():
            for qid in sorted(self.per_query):
                lines.append(f"{label}\t{qid}\t{self.per_query[qid][label]:.6f}")
        for label in self.metric_labels():
            lines.append(f"{label}\tall\t{self.means[label]:.6f}")
        if self.skipped_queries:
            lines.append("# skipped (no relevant document): " + " ".join(self.skipped_queries))
        return "\n".join(lines) + "\n"


def evaluate_run(
    rankings: list[Ranking],
    qrels: QrelSet,
    cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
) -> MetricReport:
    """Per-query and mean P/nDCG/ERR at every cutoff.

    Queries without a positively graded judged document are reported as
    skipped and excluded from the means.
    """
    if not rankings:
        raise ValueError("no rankings to evaluate")
    g_max = qrels.max_positive_grade()
    report = MetricReport(cutoffs=tuple(cutoffs), per_query={})
    for ranking in sorted(rankings, key=lambda r: r.query_id):
        judged = qrels.judged_docs(ranking.query_id)
        if not any(g > 0 for g in judged.values()):
            report.skipped_queries.append(ranking.query_id)
            continue
        row: dict[str, float] = {}
        for k in cutoffs:
            row[f"p@{k}"] = precision_at_k(ranking, qrels, k)
            row[f"ndcg@{k}"] = ndcg_at_k(ranking, qrels, k)
            row[f"err@{k}"] = err_at_k(ranking, qrels, k, g_max=g_max)
        report.per_query[ranking.query_id] = row
    if not report.per_query:
        raise ValueError("every query lacks relevant judged documents")
    for label in report.metric_labels():
        report.means[label] = sum(r[label] for r in report.per_query.values()) / len(
            report.per_query
        )
    return report


def write_run_file(rankings: list[Ranking], path, tag: str, depth: int = 1000) -> None:
    """Standard 6-column run format: query_id Q0 doc_id rank score tag."""
    with open(path, "w", encoding="utf-8") as fh:
        for ranking in sorted(rankings, key=lambda r: r.query_id):
            for rank, (doc_id, s) in enumerate(ranking.items[:depth], start=1):
                fh.write(f"{ranking.query_id} Q0 {doc_id} {rank} {s:.6f} {tag}\n")


def read_run_file(path) -> list[Ranking]:
    per_query: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, found {len(parts)}")
            qid, _, doc_id, _, score_str, _ = parts
            try:
                per_query.setdefault(qid, {})[doc_id] = float(score_str)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad score {score_str!r}") from exc
    return [Ranking.from_scores(qid, scores) for qid, scores in sorted(per_query.items())]
