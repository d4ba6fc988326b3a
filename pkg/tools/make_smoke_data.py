#!/usr/bin/env python3
"""Regenerate the bundled smoke corpus under tests/data/smoke/.

Five single-topic queries over fifty small documents. Per topic: six
relevant documents whose query terms recur across several aspect blocks
(so TextTiling yields multiple matched segments), one spam document that
opens with a single query term repeated through one long passage, and one
document with a lone passing mention. Ten mixed filler documents round
out the corpus. Relevance grades are hand-assigned below.

Deterministic: fixed seed, stable file iteration order. Run from the
repository root:  python3 tools/make_smoke_data.py
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "smoke"
SEED = 20240601

EMBED_DIM = 8

TOPICS = {
    "solar": {
        "query": "solar panel energy",
        "aspects": [
            ["sunlight", "photovoltaic", "cell", "silicon", "wafer", "efficiency"],
            ["rooftop", "mount", "tilt", "shade", "installer", "bracket"],
            ["inverter", "grid", "battery", "storage", "voltage", "meter"],
            ["cost", "subsidy", "payback", "tariff", "savings", "kilowatt"],
        ],
    },
    "coral": {
        "query": "coral reef fish",
        "aspects": [
            ["lagoon", "atoll", "tide", "shallow", "current", "sand"],
            ["polyp", "algae", "symbiosis", "bleaching", "calcium", "colony"],
            ["snapper", "wrasse", "parrotfish", "shoal", "predator", "juvenile"],
            ["diver", "snorkel", "survey", "transect", "census", "marine"],
        ],
    },
    "violin": {
        "query": "violin orchestra concert",
        "aspects": [
            ["string", "bow", "rosin", "bridge", "tuning", "luthier"],
            ["symphony", "conductor", "rehearsal", "score", "tempo", "movement"],
            ["hall", "stage", "acoustics", "audience", "applause", "encore"],
            ["sonata", "concerto", "soloist", "cadenza", "vibrato", "phrase"],
        ],
    },
    "bread": {
        "query": "bread yeast baking dough",
        "aspects": [
            ["flour", "wheat", "rye", "grain", "mill", "gluten"],
            ["knead", "proof", "rise", "ferment", "starter", "hydration"],
            ["oven", "crust", "crumb", "steam", "bake", "loaf"],
            ["bakery", "batch", "shelf", "fresh", "slice", "recipe"],
        ],
    },
    "glacier": {
        "query": "glacier ice climate",
        "aspects": [
            ["snow", "firn", "accumulation", "crevasse", "serac", "moraine"],
            ["meltwater", "runoff", "calving", "fjord", "iceberg", "terminus"],
            ["warming", "temperature", "record", "trend", "anomaly", "carbon"],
            ["expedition", "drill", "core", "sample", "radar", "altitude"],
        ],
    },
}

SPAM_FILLER = ["buy", "cheap", "click", "offer", "deal", "win", "free", "now"]

MISC_VOCAB = [
    "office", "meeting", "schedule", "window", "table", "report", "folder",
    "street", "garden", "bicycle", "kitchen", "journey", "ticket", "museum",
    "letter", "harbor", "bridge", "market", "evening", "morning",
]

STOPWORD_SPRINKLE = ["the", "of", "and", "a", "in", "to", "is", "with", "for", "on"]

# grades for the six relevant docs per topic, in doc order 01..06
REL_GRADES = [2, 2, 1, 1, 1, 1]


def words_block(rng, vocab, query_terms, n_words, query_rate):
    """A block of ~n_words topical words with query terms interleaved."""
    out = []
    for _ in range(n_words):
        if rng.random() < query_rate:
            out.append(query_terms[rng.integers(len(query_terms))])
        else:
            out.append(vocab[rng.integers(len(vocab))])
        if rng.random() < 0.25:
            out.append(STOPWORD_SPRINKLE[rng.integers(len(STOPWORD_SPRINKLE))])
    return out


def to_text(rng, blocks):
    """Join word blocks into sentence-cased paragraphs."""
    paragraphs = []
    for block in blocks:
        words = list(block)
        sentences = []
        while words:
            n = int(rng.integers(6, 13))
            chunk, words = words[:n], words[n:]
            sentences.append(" ".join(chunk).capitalize() + ".")
        paragraphs.append(" ".join(sentences))
    return "\n\n".join(paragraphs) + "\n"


def intro_block(rng):
    """Boilerplate opening paragraph; every non-spam document starts with one,
    like the navigation chrome of a real web page."""
    return words_block(rng, MISC_VOCAB, MISC_VOCAB[:1], int(rng.integers(40, 60)), 0.0)


def relevant_doc(rng, topic, grade):
    """Highly relevant docs carry a denser query-term rate than marginal ones,
    so lexical scorers can recover the grade ordering."""
    query_terms = TOPICS[topic]["query"].split()
    aspects = TOPICS[topic]["aspects"]
    order = rng.permutation(len(aspects))
    rate = 0.34 if grade >= 2 else 0.18
    blocks = [intro_block(rng)]
    for ai in order[: rng.integers(3, 5)]:
        blocks.append(
            words_block(rng, aspects[ai], query_terms, int(rng.integers(55, 80)), rate)
        )
    return to_text(rng, blocks)


def spam_doc(rng, topic):
    """One query term repeated through a single long passage: an opening
    burst of near-contiguous repeats, then a diluted continuation."""
    term = TOPICS[topic]["query"].split()[rng.integers(3)]
    words = []
    for _ in range(int(rng.integers(24, 30))):
        words.append(term)
        if rng.random() < 0.15:
            words.append(SPAM_FILLER[rng.integers(len(SPAM_FILLER))])
    for _ in range(int(rng.integers(34, 42))):
        words.append(term)
        for _ in range(int(rng.integers(4, 8))):
            words.append(SPAM_FILLER[rng.integers(len(SPAM_FILLER))])
    return to_text(rng, [words])


def mention_doc(rng, topic):
    term = TOPICS[topic]["query"].split()[0]
    blocks = [
        intro_block(rng),
        words_block(rng, MISC_VOCAB, [term], int(rng.integers(60, 90)), 0.02),
    ]
    return to_text(rng, blocks)


def scatter_doc(rng, topic):
    """Every query term present with a relevant-looking whole-document count,
    but spread one-or-two per segment across a long off-topic document.
    Word-level matching sees roughly a relevant document; segment-level
    matching sees thin, unconcentrated cells."""
    query_terms = TOPICS[topic]["query"].split()
    blocks = [intro_block(rng)]
    n_blocks = int(rng.integers(7, 9))
    for bi in range(n_blocks):
        sub = MISC_VOCAB[(bi * 5) % len(MISC_VOCAB) :][:5] + [MISC_VOCAB[(bi * 3 + 7) % len(MISC_VOCAB)]]
        block = words_block(rng, sub, query_terms, int(rng.integers(40, 55)), 0.0)
        for term in query_terms:
            pos = int(rng.integers(len(block)))
            block.insert(pos, term)
        blocks.append(block)
    return to_text(rng, blocks)


def misc_doc(rng):
    blocks = [
        words_block(rng, MISC_VOCAB, MISC_VOCAB[:1], int(rng.integers(50, 90)), 0.0)
        for _ in range(int(rng.integers(2, 4)))
    ]
    return to_text(rng, blocks)


def two_topic_doc(rng):
    a = words_block(rng, TOPICS["solar"]["aspects"][0], ["solar"], 70, 0.1)
    b = words_block(rng, TOPICS["coral"]["aspects"][0], ["coral"], 70, 0.1)
    return to_text(rng, [a, b])


def make_embeddings(path, rng):
    """Topically clustered vectors; one aspect word per topic is left OOV."""
    centers = {}
    for ti, topic in enumerate(sorted(TOPICS)):
        c = np.zeros(EMBED_DIM)
        c[ti] = 2.0
        centers[topic] = c
    misc_center = np.zeros(EMBED_DIM)
    misc_center[6] = 2.0

    entries = {}
    oov = set()
    for topic in sorted(TOPICS):
        words = set(TOPICS[topic]["query"].split())
        for ai, aspect in enumerate(TOPICS[topic]["aspects"]):
            words.update(aspect)
            oov.add(aspect[-1])  # deliberate out-of-vocabulary words
        for w in sorted(words - oov):
            entries[w] = centers[topic] + rng.normal(0, 0.15, EMBED_DIM)
    for w in MISC_VOCAB + SPAM_FILLER:
        entries[w] = misc_center + rng.normal(0, 0.15, EMBED_DIM)

    lines = [f"{len(entries)} {EMBED_DIM}"]
    for w in sorted(entries):
        comps = " ".join(f"{v:.4f}" for v in entries[w])
        lines.append(f"{w} {comps}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main():
    rng = np.random.default_rng(SEED)
    corpus_dir = OUT / "corpus"
    if corpus_dir.exists():
        shutil.rmtree(corpus_dir)
    corpus_dir.mkdir(parents=True)

    qrels_lines = []
    queries_lines = []
    for qi, topic in enumerate(sorted(TOPICS), start=1):
        qid = f"q{qi}"
        queries_lines.append(f"{qid}\t{TOPICS[topic]['query']}")
        for di in range(1, 7):
            doc_id = f"{topic}-{di:02d}"
            grade = REL_GRADES[di - 1]
            (corpus_dir / f"{doc_id}.txt").write_text(
                relevant_doc(rng, topic, grade), "utf-8"
            )
            qrels_lines.append(f"{qid} 0 {doc_id} {grade}")
        spam_id = f"{topic}-spam"
        (corpus_dir / f"{spam_id}.txt").write_text(spam_doc(rng, topic), "utf-8")
        # one spam doc per corpus carries the negative spam label
        spam_grade = -2 if topic == "solar" else 0
        qrels_lines.append(f"{qid} 0 {spam_id} {spam_grade}")
        mention_id = f"{topic}-mention"
        (corpus_dir / f"{mention_id}.txt").write_text(mention_doc(rng, topic), "utf-8")
        qrels_lines.append(f"{qid} 0 {mention_id} 0")
        for si in (1, 2):
            scatter_id = f"{topic}-scatter{si}"
            (corpus_dir / f"{scatter_id}.txt").write_text(scatter_doc(rng, topic), "utf-8")
            qrels_lines.append(f"{qid} 0 {scatter_id} 0")

    for mi in range(1, 7):
        (corpus_dir / f"misc-{mi:02d}.txt").write_text(misc_doc(rng), "utf-8")
    (corpus_dir / "misc-07.txt").write_text(two_topic_doc(rng), "utf-8")
    (corpus_dir / "misc-08.txt").write_text("Annual report archive index.\n", "utf-8")

    # a few judged non-relevant fillers so every query has explicit zeros
    for qi in range(1, 6):
        qrels_lines.append(f"q{qi} 0 misc-0{min(qi, 6)} 0")

    (OUT / "queries.tsv").write_text("\n".join(queries_lines) + "\n", "utf-8")
    (OUT / "qrels.txt").write_text("\n".join(qrels_lines) + "\n", "utf-8")
    make_embeddings(OUT / "embeddings.txt", rng)
    n_docs = len(list(corpus_dir.glob("*.txt")))
    print(f"wrote {n_docs} documents, {len(queries_lines)} queries -> {OUT}")


if __name__ == "__main__":
    main()
