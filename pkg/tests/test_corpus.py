import math

import numpy as np
import pytest

from tilerank.corpus import (
    DataError,
    DocumentRecord,
    compute_stats,
    load_corpus,
    load_embeddings,
    load_segment_cache,
    make_training_triples,
    parse_qrels,
    parse_queries,
    save_segment_cache,
    QrelSet,
)
from tilerank.segmentation import Segment, SegmentedDocument


class TestLoadCorpus:
    def test_directory_format(self, tmp_path):
        (tmp_path / "a.txt").write_text("alpha text")
        (tmp_path / "b.txt").write_text("beta text")
        records = list(load_corpus(tmp_path))
        assert [r.doc_id for r in records] == ["a", "b"]
        assert records[0].text == "alpha text"

    def test_tsv_format(self, tmp_path):
        f = tmp_path / "corpus.tsv"
        f.write_text("d1\thello world\nd2\tmore text\n")
        records = list(load_corpus(f))
        assert [(r.doc_id, r.text) for r in records] == [
            ("d1", "hello world"), ("d2", "more text"),
        ]

    def test_tsv_duplicate_id(self, tmp_path):
        f = tmp_path / "corpus.tsv"
        f.write_text("d1\tone\nd1\ttwo\n")
        with pytest.raises(DataError, match="2"):
            list(load_corpus(f))

    def test_tsv_missing_tab(self, tmp_path):
        f = tmp_path / "corpus.tsv"
        f.write_text("d1\tok\njust words\n")
        with pytest.raises(DataError, match="2"):
            list(load_corpus(f))

    def test_missing_path(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            list(load_corpus(tmp_path / "nope"))


class TestComputeStats:
    def test_single_doc(self):
        stats = compute_stats([DocumentRecord("d", "a b")])
        assert stats.n_docs == 1
        assert stats.df == {"a": 1, "b": 1}
        assert stats.idf("a") == pytest.approx(math.log(2 / 2) + 1) == 1.0

    def test_ubiquitous_term(self):
        docs = [DocumentRecord(f"d{i}", "common stuff") for i in range(10)]
        stats = compute_stats(docs)
        assert stats.idf("common") == pytest.approx(1.0)

    def test_unseen_term(self):
        docs = [DocumentRecord(f"d{i}", "word") for i in range(10)]
        stats = compute_stats(docs)
        assert stats.idf("absent") == pytest.approx(math.log(11) + 1)

    def test_empty_corpus_idf_error(self):
        stats = compute_stats([])
        with pytest.raises(ValueError):
            stats.idf("x")

    def test_idf_non_increasing_in_df_and_positive(self):
        docs = [DocumentRecord(f"d{i}", " ".join(f"w{j}" for j in range(i + 1)))
                for i in range(20)]
        stats = compute_stats(docs)
        idfs = [stats.idf(f"w{j}") for j in range(20)]
        dfs = [stats.df[f"w{j}"] for j in range(20)]
        order = np.argsort(dfs)
        sorted_idfs = np.array(idfs)[order]
        assert np.all(np.diff(sorted_idfs) <= 1e-12)
        assert all(v > 0 for v in idfs)

    def test_collection_frequencies(self):
        stats = compute_stats([DocumentRecord("d", "a a b")])
        assert stats.cf == {"a": 2, "b": 1}
        assert stats.collection_len == 3

    def test_save_load_roundtrip(self, tmp_path):
        stats = compute_stats([DocumentRecord("d", "a a b")])
        stats.save(tmp_path / "stats.json")
        loaded = type(stats).load(tmp_path / "stats.json")
        assert loaded.df == stats.df and loaded.cf == stats.cf
        assert loaded.n_docs == stats.n_docs


class TestLoadEmbeddings:
    def test_with_header(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("2 3\na 1 0 0\nb 0 1 0\n")
        store = load_embeddings(f)
        assert store.dim == 3 and len(store) == 2
        assert np.allclose(store["a"], [1, 0, 0])

    def test_headerless(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("a 1 0 0\nb 0 1 0\n")
        store = load_embeddings(f)
        assert store.dim == 3 and "b" in store

    def test_dimension_mismatch(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("3 3\na 1 0 0\nb 0 1\n")
        with pytest.raises(DataError, match="3 components"):
            load_embeddings(f)

    def test_non_numeric(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("a 1 zzz 0\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_embeddings(f)

    def test_empty_file(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_embeddings(f)


class TestParseQueries:
    def test_basic(self, tmp_path):
        f = tmp_path / "q.tsv"
        f.write_text("116\tCalifornia franchise tax board\n")
        queries = parse_queries(f, {"the"})
        assert queries == [("116", ["california", "franchise", "tax", "board"])]

    def test_empty_after_stopwords_warns(self, tmp_path, caplog):
        f = tmp_path / "q.tsv"
        f.write_text("7\tthe of\n")
        with caplog.at_level("WARNING"):
            queries = parse_queries(f, {"the", "of"})
        assert queries == [("7", [])]
        assert "empty" in caplog.text

    def test_duplicate_id(self, tmp_path):
        f = tmp_path / "q.tsv"
        f.write_text("1\ta\n1\tb\n")
        with pytest.raises(DataError, match="duplicate"):
            parse_queries(f)


class TestParseQrels:
    def test_basic(self, tmp_path):
        f = tmp_path / "qrels.txt"
        f.write_text("116 0 enwp00-69-13554 2\n")
        qrels = parse_qrels(f)
        assert qrels.grade("116", "enwp00-69-13554") == 2

    def test_column_count(self, tmp_path):
        f = tmp_path / "qrels.txt"
        f.write_text("116 0 doc1 2\n116 doc2 1\n")
        with pytest.raises(DataError, match="2"):
            parse_qrels(f)

    def test_negative_grade_accepted(self, tmp_path):
        f = tmp_path / "qrels.txt"
        f.write_text("1 0 spam -2\n")
        qrels = parse_qrels(f)
        assert qrels.grade("1", "spam") == -2

    def test_duplicate_pair(self, tmp_path):
        f = tmp_path / "qrels.txt"
        f.write_text("1 0 d 1\n1 0 d 2\n")
        with pytest.raises(DataError, match="duplicate"):
            parse_qrels(f)


class TestTrainingTriples:
    def test_single_pair(self):
        qrels = QrelSet({("q", "d1"): 2, ("q", "d2"): 0})
        triples = make_training_triples(qrels, 10, seed=0)
        assert [(t.pos_doc_id, t.neg_doc_id) for t in triples] == [("d1", "d2")]

    def test_no_strict_order_no_triples(self):
        qrels = QrelSet({("q", "d1"): 1, ("q", "d2"): 1})
        assert make_training_triples(qrels, 10, seed=0) == []

    def test_all_ordered_pairs(self):
        qrels = QrelSet({("q", "d1"): 2, ("q", "d2"): 1, ("q", "d3"): 0})
        triples = make_training_triples(qrels, 10, seed=0)
        assert {(t.pos_doc_id, t.neg_doc_id) for t in triples} == {
            ("d1", "d2"), ("d1", "d3"), ("d2", "d3"),
        }

    def test_query_without_positive_contributes_nothing(self):
        qrels = QrelSet({("q", "d1"): 0, ("q", "d2"): -2})
        assert make_training_triples(qrels, 10, seed=0) == []

    def test_cap_and_determinism(self):
        grades = {("q", f"d{i}"): i % 4 for i in range(12)}
        qrels = QrelSet(grades)
        a = make_training_triples(qrels, 5, seed=3)
        b = make_training_triples(qrels, 5, seed=3)
        c = make_training_triples(qrels, 5, seed=4)
        assert len(a) == 5
        assert a == b
        assert a != c

    def test_grade_invariant(self):
        grades = {("q1", f"d{i}"): int(i % 3) - 1 for i in range(9)}
        qrels = QrelSet(grades)
        for t in make_training_triples(qrels, 50, seed=0):
            assert qrels.grade(t.query_id, t.pos_doc_id) > qrels.grade(
                t.query_id, t.neg_doc_id
            )


def sample_docs():
    return [
        SegmentedDocument(
            doc_id="doc-a",
            segments=[
                Segment(index=1, term_counts={"x": 2, "y": 1}, span=(1, 3)),
                Segment(index=2, term_counts={"z": 4}, span=(4, 5)),
            ],
        ),
        SegmentedDocument(doc_id="doc-b", segments=[]),
    ]


class TestSegmentCache:
    def test_roundtrip_identity(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        docs = sample_docs()
        save_segment_cache(docs, path, alpha=20, beta=6)
        loaded, header = load_segment_cache(path, expect_alpha=20, expect_beta=6)
        assert header["alpha"] == 20 and header["beta"] == 6
        assert [d.doc_id for d in loaded] == ["doc-a", "doc-b"]
        assert [s.term_counts for s in loaded[0].segments] == [
            {"x": 2, "y": 1}, {"z": 4},
        ]
        assert [s.span for s in loaded[0].segments] == [(1, 3), (4, 5)]

    def test_byte_stable(self, tmp_path):
        p1, p2 = tmp_path / "c1.jsonl", tmp_path / "c2.jsonl"
        save_segment_cache(sample_docs(), p1, 20, 6)
        loaded, _ = load_segment_cache(p1)
        save_segment_cache(loaded, p2, 20, 6)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_cache(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        save_segment_cache([], path, 20, 6)
        loaded, _ = load_segment_cache(path)
        assert loaded == []

    def test_parameter_mismatch_warns(self, tmp_path, caplog):
        path = tmp_path / "cache.jsonl"
        save_segment_cache(sample_docs(), path, alpha=20, beta=6)
        with caplog.at_level("WARNING"):
            load_segment_cache(path, expect_alpha=10)
        assert "alpha" in caplog.text

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"format": "tilerank-segments", "version": 99}\n')
        with pytest.raises(DataError, match="version"):
            load_segment_cache(path)

    def test_corrupt_line(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        save_segment_cache(sample_docs(), path, 20, 6)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write("{broken json\n")
        with pytest.raises(DataError, match="corrupt"):
            load_segment_cache(path)
