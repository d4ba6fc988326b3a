"""Fixed-size query/segment interaction matrices.

The "tile image" fed to the ranker: an n_q x n_b grid of 3-channel cells
built from a standardized query (padded with empty-word markers) and a
standardized segment list (padded with empty segments, or with everything
from the n_b-th segment onward squeezed into the final slot). Channels:

  0  term frequency of the query term in the segment
  1  idf of the query term, gated by presence in the segment
  2  best Gaussian similarity exp(-||v_w - v_t||^2) between the query
     term's embedding and any embedded term of the segment

Cells touching an empty word or empty segment are all zero.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from tilerank.corpus import CorpusStats, EmbeddingStore
from tilerank.segmentation import Segment, SegmentedDocument

log = logging.getLogger(__name__)

DEFAULT_N_B = 30

EMPTY_WORD = None  # distinguished marker for padded query slots
EMPTY_SEGMENT = None  # distinguished marker for padded segment slots


@dataclass(frozen=True)
class StandardizedQuery:
    """Query terms padded (or truncated) to exactly n_q slots."""

    slots: tuple[str | None, ...]

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class StandardizedSegments:
    """Segments padded or squeezed to exactly n_b slots."""

    slots: tuple[Segment | None, ...]

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class InteractionMatrix:
    """n_q x n_b x 3 grid of non-negative channel values."""

    cells: np.ndarray  # float64, shape (n_q, n_b, 3)

    @property
    def n_q(self) -> int:
        return self.cells.shape[0]

    @property
    def n_b(self) -> int:
        return self.cells.shape[1]

    def tf(self) -> np.ndarray:
        return self.cells[:, :, 0]

    def idf(self) -> np.ndarray:
        return self.cells[:, :, 1]

    def sim(self) -> np.ndarray:
        return self.cells[:, :, 2]


def standardize_query(terms: list[str], n_q: int) -> StandardizedQuery:
    """Pad with empty-word markers up to n_q; truncate longer queries with a warning."""
    if n_q < 1:
        raise ValueError(f"n_q must be >= 1, got {n_q}")
    if len(terms) > n_q:
        log.warning("query has %d terms, truncating to n_q=%d", len(terms), n_q)
        terms = terms[:n_q]
    return StandardizedQuery(slots=tuple(terms) + (EMPTY_WORD,) * (n_q - len(terms)))


def standardize_segments(segments: list[Segment], n_b: int) -> StandardizedSegments:
    """Pad short documents with empty segments; squeeze long ones into slot n_b.

    When the document has y > n_b segments, slots 1..n_b-1 keep their
    segments and slot n_b aggregates the term counts of segments n_b..y.
    """
    if n_b < 1:
        raise ValueError(f"n_b must be >= 1, got {n_b}")
    y = len(segments)
    if y <= n_b:
        return StandardizedSegments(
            slots=tuple(segments) + (EMPTY_SEGMENT,) * (n_b - y)
        )
    merged: Counter[str] = Counter()
    for seg in segments[n_b - 1 :]:
        merged.update(seg.term_counts)
    tail = Segment(
        index=n_b,
        term_counts=dict(merged),
        span=(segments[n_b - 1].span[0], segments[-1].span[1]),
    )
    return StandardizedSegments(slots=tuple(segments[: n_b - 1]) + (tail,))


def color_cell(
    term: str | None,
    segment: Segment | None,
    stats: CorpusStats,
    embeddings: EmbeddingStore,
) -> tuple[float, float, float]:
    """Channel triple for one (query slot, segment slot) pair.

    Similarity falls back to the exact-match indicator when the query term
    has no embedding or the segment contains no embedded term.
    """
    if term is EMPTY_WORD or segment is EMPTY_SEGMENT:
        return (0.0, 0.0, 0.0)
    tf = float(segment.term_counts.get(term, 0))
    present = 1.0 if tf > 0 else 0.0
    idf = stats.idf(term) * present
    if term in embeddings:
        v_w = embeddings[term]
        best = -1.0
        for t in segment.term_counts:
            if t in embeddings:
                diff = v_w - embeddings[t]
                best = max(best, float(np.exp(-np.dot(diff, diff))))
        sim = best if best >= 0.0 else present
    else:
        sim = present
    return (tf, idf, sim)


def build_matrix(
    query_terms: list[str],
    doc: SegmentedDocument,
    stats: CorpusStats,
    embeddings: EmbeddingStore,
    n_q: int,
    n_b: int = DEFAULT_N_B,
) -> InteractionMatrix:
    """Standardize both axes and paint every cell. Output is always n_q x n_b x 3."""
    squery = standardize_query(query_terms, n_q)
    ssegs = standardize_segments(doc.segments, n_b)
    cells = np.zeros((n_q, n_b, 3), dtype=np.float64)
    for i, term in enumerate(squery.slots):
        if term is EMPTY_WORD:
            continue
        for j, segment in enumerate(ssegs.slots):
            if segment is EMPTY_SEGMENT:
                continue
            cells[i, j, :] = color_cell(term, segment, stats, embeddings)
    return InteractionMatrix(cells=cells)
