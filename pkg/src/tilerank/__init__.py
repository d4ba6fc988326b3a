"""Topic-segmentation based ad-hoc retrieval.

Pipeline: TextTiling topic segmentation -> fixed-size query/segment
interaction matrices (three channels: tf, idf presence, embedding
similarity) -> multi-granularity CNN+LSTM+MLP ranker trained with a
pairwise logistic loss; plus BM25 / query-likelihood baselines, TREC-style
evaluation, and a tile-image renderer.
"""

__version__ = "0.1.0"

from tilerank.segmentation import segment_document, SegmentedDocument, Segment
from tilerank.matrix import build_matrix, InteractionMatrix

__all__ = [
    "__version__",
    "segment_document",
    "SegmentedDocument",
    "Segment",
    "build_matrix",
    "InteractionMatrix",
]
