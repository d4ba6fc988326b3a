"""TextTiling topic segmentation.

Splits a document into topically coherent segments: terms are grouped
into fixed-size token sequences, adjacent sequences are compared through
windowed cosine similarity of term counts, and boundaries are placed at
gaps whose depth score exceeds an adaptive threshold (mean depth minus
half the standard deviation).

All functions here are pure; segmenting distinct documents concurrently
is safe.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

DEFAULT_ALPHA = 20
DEFAULT_BETA = 6

# Paragraph-break snapping tolerance, in terms, around the nominal cut.
PARAGRAPH_SNAP_WINDOW = 5

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_PARAGRAPH_RE = re.compile(r"\n[ \t\r]*\n")


def load_default_stopwords() -> set[str]:
    """Stopword list bundled with the package (one lowercase term per line)."""
    text = resources.files("tilerank").joinpath("data/stopwords.txt").read_text("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def load_stopwords(path) -> set[str]:
    """Load a stopword file: UTF-8, one term per line, blanks ignored."""
    with open(path, encoding="utf-8") as fh:
        return {line.strip().lower() for line in fh if line.strip()}


@dataclass(frozen=True)
class TokenSequence:
    """A pseudo-sentence of roughly ``alpha`` normalized terms.

    ``index`` is 1-based and strictly increasing within a document.
    """

    index: int
    terms: tuple[str, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("token sequence must contain at least one term")


@dataclass(frozen=True)
class SimilarityCurve:
    """Gap similarities; entry i (1-based) is sim between sequences i and i+1."""

    gaps: tuple[float, ...]
    window: int

    def __len__(self) -> int:
        return len(self.gaps)

    def value(self, i: int) -> float:
        """Similarity at 1-based gap index i."""
        return self.gaps[i - 1]


@dataclass
class Segment:
    """A maximal run of token sequences between two topic boundaries."""

    index: int
    term_counts: dict[str, int]
    span: tuple[int, int]  # first and last token-sequence index, 1-based

    def length(self) -> int:
        return sum(self.term_counts.values())

    def __contains__(self, term: str) -> bool:
        return term in self.term_counts


@dataclass
class SegmentedDocument:
    doc_id: str
    segments: list[Segment] = field(default_factory=list)

    @property
    def total_term_counts(self) -> dict[str, int]:
        total: Counter[str] = Counter()
        for seg in self.segments:
            total.update(seg.term_counts)
        return dict(total)

    def length(self) -> int:
        return sum(seg.length() for seg in self.segments)


def normalize_and_tokenize(
    raw_text: str, stopwords: set[str] | frozenset[str] = frozenset()
) -> tuple[list[str], set[int]]:
    """Tokenize text into lowercase alphanumeric terms, dropping stopwords.

    Returns the term list plus the set of paragraph-break positions: a break
    at position p means a blank line separated term p-1 from term p (counting
    surviving terms, 0-based slicing convention). Only interior breaks are
    kept.
    """
    text = unicodedata.normalize("NFC", raw_text).lower()
    terms: list[str] = []
    breaks: set[int] = set()
    for para in _PARAGRAPH_RE.split(text):
        for match in _TOKEN_RE.finditer(para):
            token = match.group(0)
            if token not in stopwords:
                terms.append(token)
        breaks.add(len(terms))
    return terms, {p for p in breaks if 0 < p < len(terms)}


def build_token_sequences(
    terms: list[str],
    paragraph_breaks: set[int],
    alpha: int = DEFAULT_ALPHA,
) -> list[TokenSequence]:
    """Group terms into non-overlapping sequences of nominal length alpha.

    A cut snaps to a paragraph break that falls within
    [alpha - 5, alpha + 5] terms of the sequence start (nearest to the
    nominal cut wins; ties go to the earlier break). A trailing fragment
    shorter than alpha/2 is merged into the previous sequence.
    """
    if alpha < 2:
        raise ValueError(f"alpha must be >= 2, got {alpha}")
    cuts: list[int] = []
    start = 0
    n = len(terms)
    while n - start > alpha:
        nominal = start + alpha
        lo = start + alpha - PARAGRAPH_SNAP_WINDOW
        hi = start + alpha + PARAGRAPH_SNAP_WINDOW
        candidates = [p for p in paragraph_breaks if lo <= p <= hi and p > start]
        cut = min(candidates, key=lambda p: (abs(p - nominal), p)) if candidates else nominal
        cut = min(cut, n)
        cuts.append(cut)
        start = cut
    if start < n:
        cuts.append(n)
    # Merge an undersized final fragment back into its predecessor.
    if len(cuts) >= 2 and cuts[-1] - cuts[-2] < alpha / 2:
        cuts.pop(-2)
    sequences = []
    prev = 0
    for idx, cut in enumerate(cuts, start=1):
        sequences.append(TokenSequence(index=idx, terms=tuple(terms[prev:cut])))
        prev = cut
    return sequences


def _window_counts(sequences: list[TokenSequence], first: int, last: int) -> Counter:
    """Aggregate term counts over sequences with 1-based indices first..last."""
    counts: Counter[str] = Counter()
    for seq in sequences[first - 1 : last]:
        counts.update(seq.terms)
    return counts


def gap_similarity(sequences: list[TokenSequence], i: int, beta: int = DEFAULT_BETA) -> float:
    """Cosine similarity of term counts in the windows left and right of gap i.

    Gap i (1-based) separates sequences i and i+1; windows hold up to beta
    sequences on each side, clipped at the document edges.
    """
    n = len(sequences)
    if not 1 <= i <= n - 1:
        raise IndexError(f"gap index {i} out of range for {n} sequences")
    left = _window_counts(sequences, max(1, i - beta + 1), i)
    right = _window_counts(sequences, i + 1, min(n, i + beta))
    dot = sum(c * right[t] for t, c in left.items())
    norm_sq = sum(c * c for c in left.values()) * sum(c * c for c in right.values())
    if norm_sq == 0.0:
        return 0.0
    return min(1.0, dot / math.sqrt(norm_sq))


def similarity_curve(
    sequences: list[TokenSequence],
    beta: int = DEFAULT_BETA,
    smoothing_rounds: int = 0,
) -> SimilarityCurve:
    """Similarity at every adjacent gap; one fewer entry than sequences.

    ``smoothing_rounds`` applies that many passes of width-3 moving-average
    smoothing. Off by default: boundary detection runs on the raw curve.
    """
    gaps = [gap_similarity(sequences, i, beta) for i in range(1, len(sequences))]
    for _ in range(smoothing_rounds):
        if len(gaps) < 3:
            break
        gaps = [
            (gaps[max(0, j - 1)] + gaps[j] + gaps[min(len(gaps) - 1, j + 1)]) / 3.0
            for j in range(len(gaps))
        ]
    return SimilarityCurve(gaps=tuple(gaps), window=beta)


def depth_score(curve: SimilarityCurve, i: int) -> float:
    """Sum of absolute drops from gap i to its nearest enclosing peaks.

    Each peak is found by walking outward from i while the similarity is
    non-decreasing; the walk stops where the curve stops rising (or at the
    curve end).
    """
    gaps = curve.gaps
    n = len(gaps)
    if not 1 <= i <= n:
        raise IndexError(f"gap index {i} out of range for curve of length {n}")
    v = gaps[i - 1]
    left = i
    while left > 1 and gaps[left - 2] >= gaps[left - 1]:
        left -= 1
    right = i
    while right < n and gaps[right] >= gaps[right - 1]:
        right += 1
    return abs(gaps[left - 1] - v) + abs(gaps[right - 1] - v)


def find_boundaries(depths: list[float]) -> set[int]:
    """Gaps whose depth exceeds mean - std/2, without adjacent pairs.

    Uses the population standard deviation and a strict inequality. When two
    passing gaps are adjacent the deeper one is kept (earlier on ties).
    Returns 1-based gap indices.
    """
    if not depths:
        return set()
    n = len(depths)
    mean = sum(depths) / n
    std = math.sqrt(sum((d - mean) ** 2 for d in depths) / n)
    threshold = mean - std / 2.0
    passing = [i for i in range(1, n + 1) if depths[i - 1] > threshold]
    kept: set[int] = set()
    for gap in sorted(passing, key=lambda g: (-depths[g - 1], g)):
        if gap - 1 not in kept and gap + 1 not in kept:
            kept.add(gap)
    return kept


def segment_document(
    raw_text: str,
    alpha: int = DEFAULT_ALPHA,
    beta: int = DEFAULT_BETA,
    stopwords: set[str] | frozenset[str] = frozenset(),
    doc_id: str = "",
    smoothing_rounds: int = 0,
) -> SegmentedDocument:
    """Run the full segmentation pipeline on one raw document.

    An empty document yields zero segments; a document with no detected
    boundary yields a single segment spanning every token sequence.
    """
    terms, breaks = normalize_and_tokenize(raw_text, stopwords)
    sequences = build_token_sequences(terms, breaks, alpha)
    return segment_sequences(sequences, beta, doc_id=doc_id, smoothing_rounds=smoothing_rounds)


def segment_sequences(
    sequences: list[TokenSequence],
    beta: int = DEFAULT_BETA,
    doc_id: str = "",
    smoothing_rounds: int = 0,
) -> SegmentedDocument:
    """Boundary detection and segment assembly over prebuilt token sequences."""
    if not sequences:
        return SegmentedDocument(doc_id=doc_id)
    if len(sequences) == 1:
        boundaries: set[int] = set()
    else:
        curve = similarity_curve(sequences, beta, smoothing_rounds=smoothing_rounds)
        depths = [depth_score(curve, i) for i in range(1, len(curve) + 1)]
        boundaries = find_boundaries(depths)
    segments: list[Segment] = []
    start = 1
    for gap in sorted(boundaries) + [len(sequences)]:
        counts = _window_counts(sequences, start, gap)
        segments.append(
            Segment(index=len(segments) + 1, term_counts=dict(counts), span=(start, gap))
        )
        start = gap + 1
    return SegmentedDocument(doc_id=doc_id, segments=segments)


def segment_words(
    raw_text: str,
    stopwords: set[str] | frozenset[str] = frozenset(),
    doc_id: str = "",
) -> SegmentedDocument:
    """Word-level pseudo-segmentation: every surviving term is its own segment.

    Feeds the word-to-word ablation; the regular pipeline never uses it.
    """
    terms, _ = normalize_and_tokenize(raw_text, stopwords)
    segments = [
        Segment(index=i, term_counts={t: 1}, span=(i, i))
        for i, t in enumerate(terms, start=1)
    ]
    return SegmentedDocument(doc_id=doc_id, segments=segments)
