"""BM25 first-stage retrieval.

The scoring kernel is compiled from Cython when available; set
``INSERTRANK_PURE_PYTHON=1`` to force the numpy implementation.
"""

from .index import (
    BACKEND,
    Bm25Index,
    Bm25Params,
    IndexFormatError,
    ScoredCandidate,
    build_index,
    idf,
    load_index,
    retrieve_topk,
    save_index,
    score,
    tokenize,
)

__all__ = [
    "BACKEND",
    "Bm25Index",
    "Bm25Params",
    "IndexFormatError",
    "ScoredCandidate",
    "build_index",
    "idf",
    "load_index",
    "retrieve_topk",
    "save_index",
    "score",
    "tokenize",
]
