"""Corpus, query, judgment, and embedding ingestion plus corpus statistics.

File formats (all UTF-8, documented in the README):
  * corpus: a directory of ``.txt`` files (doc id = file stem) or a TSV with
    ``doc_id<TAB>text`` per line
  * queries: TSV with ``query_id<TAB>text`` per line
  * qrels: whitespace-separated ``query_id 0 doc_id grade``
  * embeddings: textual word-vector format, optional ``count dim`` header
  * segment cache: JSON-lines with a parameter header line
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from tilerank.segmentation import Segment, SegmentedDocument, normalize_and_tokenize

log = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1


class DataError(ValueError):
    """Malformed input file; message carries the offending line number."""


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    text: str


@dataclass
class CorpusStats:
    """Document count, document/collection frequencies, and derived idf."""

    n_docs: int
    df: dict[str, int]
    cf: dict[str, int]
    collection_len: int

    @property
    def vocabulary(self) -> set[str]:
        return set(self.df)

    def idf(self, term: str) -> float:
        """Smoothed idf: ln((N+1)/(df+1)) + 1, strictly positive."""
        if self.n_docs == 0:
            raise ValueError("idf undefined for an empty corpus")
        return math.log((self.n_docs + 1) / (self.df.get(term, 0) + 1)) + 1.0

    def save(self, path) -> None:
        payload = {
            "format": "tilerank-stats",
            "version": CACHE_FORMAT_VERSION,
            "n_docs": self.n_docs,
            "collection_len": self.collection_len,
            "df": self.df,
            "cf": self.cf,
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "CorpusStats":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != "tilerank-stats":
            raise DataError(f"{path}: not a corpus-stats file")
        return cls(
            n_docs=payload["n_docs"],
            df=payload["df"],
            cf=payload["cf"],
            collection_len=payload["collection_len"],
        )


class EmbeddingStore:
    """Term -> dense vector map; all vectors share one dimension."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        self.dim = dim
        self.vectors = vectors

    def __contains__(self, term: str) -> bool:
        return term in self.vectors

    def __getitem__(self, term: str) -> np.ndarray:
        return self.vectors[term]

    def __len__(self) -> int:
        return len(self.vectors)


class QrelSet:
    """Graded relevance judgments keyed by (query_id, doc_id)."""

    def __init__(self, grades: dict[tuple[str, str], int] | None = None):
        self._grades = dict(grades or {})

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        key = (query_id, doc_id)
        if key in self._grades:
            raise DataError(f"duplicate judgment for query {query_id}, doc {doc_id}")
        self._grades[key] = grade

    def grade(self, query_id: str, doc_id: str, default: int | None = None) -> int | None:
        return self._grades.get((query_id, doc_id), default)

    def judged_docs(self, query_id: str) -> dict[str, int]:
        return {d: g for (q, d), g in self._grades.items() if q == query_id}

    def query_ids(self) -> list[str]:
        return sorted({q for q, _ in self._grades})

    def max_positive_grade(self) -> int:
        """Largest grade above zero anywhere in the set; 0 if none exists."""
        positives = [g for g in self._grades.values() if g > 0]
        return max(positives) if positives else 0

    def __len__(self) -> int:
        return len(self._grades)

    def items(self):
        return self._grades.items()


@dataclass(frozen=True)
class TrainingTriple:
    query_id: str
    pos_doc_id: str
    neg_doc_id: str


def load_corpus(path, fmt: str = "auto") -> Iterator[DocumentRecord]:
    """Yield documents in stable order from a directory of text files or a TSV.

    Directory format: every ``*.txt`` file is one document, id = file stem,
    sorted by id. TSV format: ``doc_id<TAB>text`` per line. Duplicate ids are
    rejected in both formats.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus path does not exist: {path}")
    if fmt == "auto":
        fmt = "dir" if path.is_dir() else "tsv"
    seen: set[str] = set()
    if fmt == "dir":
        for file in sorted(path.glob("*.txt")):
            doc_id = file.stem
            if doc_id in seen:
                raise DataError(f"duplicate doc id {doc_id!r} in {path}")
            seen.add(doc_id)
            yield DocumentRecord(doc_id=doc_id, text=file.read_text(encoding="utf-8"))
    elif fmt == "tsv":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if "\t" not in line:
                    raise DataError(f"{path}:{lineno}: expected doc_id<TAB>text")
                doc_id, text = line.split("\t", 1)
                if not doc_id:
                    raise DataError(f"{path}:{lineno}: empty doc id")
                if doc_id in seen:
                    raise DataError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
                seen.add(doc_id)
                yield DocumentRecord(doc_id=doc_id, text=text)
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


def compute_stats(
    docs: Iterable[DocumentRecord], stopwords: set[str] | frozenset[str] = frozenset()
) -> CorpusStats:
    """Document and collection frequencies over tokenized, stopword-filtered text."""
    df: Counter[str] = Counter()
    cf: Counter[str] = Counter()
    n_docs = 0
    collection_len = 0
    for record in docs:
        n_docs += 1
        terms, _ = normalize_and_tokenize(record.text, stopwords)
        counts = Counter(terms)
        df.update(counts.keys())
        cf.update(counts)
        collection_len += len(terms)
    return CorpusStats(n_docs=n_docs, df=dict(df), cf=dict(cf), collection_len=collection_len)


def stats_from_segmented(docs: Iterable[SegmentedDocument]) -> CorpusStats:
    """Corpus statistics recomputed from already-segmented documents."""
    df: Counter[str] = Counter()
    cf: Counter[str] = Counter()
    n_docs = 0
    collection_len = 0
    for doc in docs:
        n_docs += 1
        totals = doc.total_term_counts
        df.update(totals.keys())
        cf.update(totals)
        collection_len += sum(totals.values())
    return CorpusStats(n_docs=n_docs, df=dict(df), cf=dict(cf), collection_len=collection_len)


def load_embeddings(path) -> EmbeddingStore:
    """Parse a textual word-vector file.

    The first line may be a ``count dim`` header; without one the dimension
    is inferred from the first vector line. Dimension mismatches and
    non-numeric components raise DataError.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            word, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise DataError(f"{path}:{lineno}: vector line has no components")
            if len(comps) != dim:
                raise DataError(
                    f"{path}:{lineno}: expected {dim} components, found {len(comps)}"
                )
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric component ({exc})") from exc
            vectors[word] = vec
    if dim is None or not vectors:
        raise DataError(f"{path}: empty embedding file")
    return EmbeddingStore(dim=dim, vectors=vectors)


def parse_queries(
    path, stopwords: set[str] | frozenset[str] = frozenset()
) -> list[tuple[str, list[str]]]:
    """Parse a query TSV; terms are normalized with the document tokenizer."""
    path = Path(path)
    queries: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise DataError(f"{path}:{lineno}: expected query_id<TAB>text")
            query_id, text = line.split("\t", 1)
            if query_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate query id {query_id!r}")
            seen.add(query_id)
            terms, _ = normalize_and_tokenize(text, stopwords)
            if not terms:
                log.warning("query %s is empty after stopword removal", query_id)
            queries.append((query_id, terms))
    return queries


def parse_qrels(path) -> QrelSet:
    """Parse 4-column judgments: query_id, unused literal, doc_id, grade."""
    path = Path(path)
    qrels = QrelSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, found {len(parts)}")
            query_id, _, doc_id, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: grade must be an integer") from exc
            try:
                qrels.add(query_id, doc_id, grade)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return qrels


def make_training_triples(
    qrels: QrelSet, per_query_cap: int, seed: int
) -> list[TrainingTriple]:
    """Sample up to ``per_query_cap`` grade-ordered (pos, neg) pairs per query.

    Pairs require a strictly higher positive grade; queries without any
    document graded above zero contribute nothing. Sampling is uniform and
    deterministic for a fixed seed.
    """
    if per_query_cap < 1:
        raise ValueError(f"per_query_cap must be >= 1, got {per_query_cap}")
    rng = random.Random(seed)
    triples: list[TrainingTriple] = []
    for query_id in qrels.query_ids():
        judged = qrels.judged_docs(query_id)
        if not any(g > 0 for g in judged.values()):
            continue
        pairs = [
            (pos, neg)
            for pos in sorted(judged)
            for neg in sorted(judged)
            if judged[pos] > judged[neg]
        ]
        if len(pairs) > per_query_cap:
            pairs = rng.sample(pairs, per_query_cap)
        triples.extend(
            TrainingTriple(query_id=query_id, pos_doc_id=p, neg_doc_id=n) for p, n in pairs
        )
    return triples


def save_segment_cache(
    docs: Iterable[SegmentedDocument], path, alpha: int, beta: int
) -> None:
    """Persist segmented documents as JSON lines behind a parameter header."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": "tilerank-segments",
            "version": CACHE_FORMAT_VERSION,
            "alpha": alpha,
            "beta": beta,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc in docs:
            record = {
                "doc_id": doc.doc_id,
                "segments": [
                    {"span": list(seg.span), "counts": seg.term_counts}
                    for seg in doc.segments
                ],
            }
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def load_segment_cache(
    path, expect_alpha: int | None = None, expect_beta: int | None = None
) -> tuple[list[SegmentedDocument], dict]:
    """Reload a segment cache; warns when stored parameters differ from expected."""
    docs: list[SegmentedDocument] = []
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:1: corrupt cache header") from exc
        if header.get("format") != "tilerank-segments":
            raise DataError(f"{path}: not a segment cache")
        if header.get("version") != CACHE_FORMAT_VERSION:
            raise DataError(
                f"{path}: cache version {header.get('version')} unsupported "
                f"(expected {CACHE_FORMAT_VERSION})"
            )
        for expected, key in ((expect_alpha, "alpha"), (expect_beta, "beta")):
            if expected is not None and header.get(key) != expected:
                log.warning(
                    "segment cache %s was built with %s=%s but run is configured %s=%s",
                    path, key, header.get(key), key, expected,
                )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                segments = [
                    Segment(
                        index=i,
                        term_counts={t: int(c) for t, c in seg["counts"].items()},
                        span=(int(seg["span"][0]), int(seg["span"][1])),
                    )
                    for i, seg in enumerate(record["segments"], start=1)
                ]
                docs.append(SegmentedDocument(doc_id=record["doc_id"], segments=segments))
            except (json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: corrupt cache line") from exc
    return docs, header
