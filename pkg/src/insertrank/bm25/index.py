"""Inverted index, Okapi BM25 scoring and top-k retrieval."""

from __future__ import annotations

import json
import math
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import CorpusStore, Document, Query

if os.environ.get("INSERTRANK_PURE_PYTHON"):
    from . import _pykernel as kernel
else:
    try:
        from . import _kernel as kernel
    except ImportError:
        from . import _pykernel as kernel

BACKEND: str = kernel.NAME

MAGIC = b"BMIX"
VERSION = b"1"
_TOKEN_RE = re.compile(r"[^\W_]+")


class IndexFormatError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric codepoint."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not (self.k1 >= 0 and math.isfinite(self.k1)):
            raise ValueError(f"k1 must be finite and >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class ScoredCandidate:
    doc_id: str
    score: float
    first_stage_rank: int


def idf(n_docs: int, df: int) -> float:
    """Non-negative (Lucene-style) inverse document frequency."""
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


class Bm25Index:
    """Postings in CSR layout: term ``t`` owns ``post_docs[offsets[t]:offsets[t+1]]``."""

    def __init__(self, corpus, params, vocab, offsets, post_docs, post_tfs, doc_lengths):
        self.corpus = corpus
        self.params = params
        self.vocab: dict[str, int] = vocab
        self.offsets = offsets
        self.post_docs = post_docs
        self.post_tfs = post_tfs
        self.doc_lengths = doc_lengths
        self.n_docs = len(doc_lengths)
        self.avgdl = float(doc_lengths.sum()) / self.n_docs if self.n_docs else 0.0
        if self.avgdl > 0:
            k1, b = params.k1, params.b
            self.doc_norms = k1 * (1.0 - b + b * doc_lengths.astype(np.float64) / self.avgdl)
        else:
            self.doc_norms = np.zeros(self.n_docs, dtype=np.float64)
        ids = [d.doc_id for d in corpus]
        self.id_rank = np.empty(self.n_docs, dtype=np.int64)
        self.id_rank[sorted(range(self.n_docs), key=ids.__getitem__)] = np.arange(
            self.n_docs, dtype=np.int64
        )

    @property
    def N(self) -> int:
        return self.n_docs

    def df(self, term: str) -> int:
        tid = self.vocab.get(term)
        if tid is None:
            return 0
        return int(self.offsets[tid + 1] - self.offsets[tid])

    def postings(self, term: str) -> list[tuple[int, int]]:
        tid = self.vocab.get(term)
        if tid is None:
            return []
        lo, hi = self.offsets[tid], self.offsets[tid + 1]
        return list(zip(self.post_docs[lo:hi].tolist(), self.post_tfs[lo:hi].tolist()))

    def term_frequency(self, term: str, position: int) -> int:
        tid = self.vocab.get(term)
        if tid is None:
            return 0
        lo, hi = int(self.offsets[tid]), int(self.offsets[tid + 1])
        i = lo + int(np.searchsorted(self.post_docs[lo:hi], position))
        if i < hi and self.post_docs[i] == position:
            return int(self.post_tfs[i])
        return 0

    def _query_terms(self, tokens: Sequence[str]):
        term_ids, idfs = [], []
        for tok in tokens:
            tid = self.vocab.get(tok)
            if tid is None:
                continue
            term_ids.append(tid)
            idfs.append(idf(self.n_docs, int(self.offsets[tid + 1] - self.offsets[tid])))
        return np.asarray(term_ids, dtype=np.int64), np.asarray(idfs, dtype=np.float64)

    def score_all(self, tokens: Sequence[str]) -> np.ndarray:
        term_ids, idfs = self._query_terms(tokens)
        return kernel.accumulate(
            self.offsets, self.post_docs, self.post_tfs, self.doc_norms,
            term_ids, idfs, float(self.params.k1),
        )


def build_index(corpus: CorpusStore, params: Bm25Params | None = None) -> Bm25Index:
    params = params or Bm25Params()
    vocab: dict[str, int] = {}
    term_col: list[int] = []
    doc_col: list[int] = []
    tf_col: list[int] = []
    lengths = np.zeros(len(corpus), dtype=np.int32)
    for pos, doc in enumerate(corpus):
        tokens = tokenize(doc.full_text)
        lengths[pos] = len(tokens)
        for term, tf in Counter(tokens).items():
            tid = vocab.setdefault(term, len(vocab))
            term_col.append(tid)
            doc_col.append(pos)
            tf_col.append(tf)
    terms = np.asarray(term_col, dtype=np.int64)
    # stable sort keeps doc positions ascending inside each postings list
    order = np.argsort(terms, kind="stable")
    counts = np.bincount(terms, minlength=len(vocab))
    offsets = np.zeros(len(vocab) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return Bm25Index(
        corpus,
        params,
        vocab,
        offsets,
        np.asarray(doc_col, dtype=np.int32)[order],
        np.asarray(tf_col, dtype=np.int32)[order],
        lengths,
    )


def score(index: Bm25Index, query_tokens: Sequence[str], position: int) -> float:
    """BM25 score of one document; duplicate query tokens count once each."""
    if not 0 <= position < index.n_docs:
        raise IndexError(f"document position {position} out of range [0, {index.n_docs})")
    k1 = index.params.k1
    norm = float(index.doc_norms[position])
    total = 0.0
    for tok in query_tokens:
        tf = index.term_frequency(tok, position)
        if tf:
            w = idf(index.n_docs, index.df(tok))
            total += w * tf * (k1 + 1.0) / (tf + norm)
    return total


def retrieve_topk(
    index: Bm25Index,
    query: Query | str,
    k: int,
    use_reformulated: bool = True,
) -> list[ScoredCandidate]:
    """Top ``k`` documents with positive score, by (score desc, doc_id asc)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    text = query if isinstance(query, str) else query.search_text(use_reformulated)
    scores = index.score_all(tokenize(text))
    positions = kernel.select_topk(scores, index.id_rank, k)
    corpus = index.corpus
    return [
        ScoredCandidate(corpus[p].doc_id, float(scores[p]), rank)
        for rank, p in enumerate(positions.tolist(), 1)
    ]


# -- persistence -------------------------------------------------------------

_ARRAYS = (
    ("offsets", "<i8"),
    ("post_docs", "<i4"),
    ("post_tfs", "<i4"),
    ("doc_lengths", "<i4"),
)


def save_index(index: Bm25Index, path) -> None:
    """Write the index (and its documents) to a versioned binary file."""
    terms = [None] * len(index.vocab)
    for term, tid in index.vocab.items():
        terms[tid] = term
    header = {
        "params": {"k1": index.params.k1, "b": index.params.b},
        "terms": terms,
        "documents": [d.to_json() for d in index.corpus],
        "arrays": {name: int(getattr(index, name).shape[0]) for name, _ in _ARRAYS},
    }
    blob = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC + VERSION)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name, dtype in _ARRAYS:
            fh.write(np.ascontiguousarray(getattr(index, name), dtype=dtype).tobytes())
    os.replace(tmp, path)


def load_index(path) -> Bm25Index:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise IndexFormatError(f"{path}: not a BM25 index file")
    if data[4:5] != VERSION:
        raise IndexFormatError(f"{path}: unsupported index version {data[4:5]!r}")
    try:
        (hlen,) = struct.unpack_from("<Q", data, 5)
        start = 13
        header = json.loads(data[start:start + hlen].decode("utf-8"))
        cursor = start + hlen
        arrays = {}
        for name, dtype in _ARRAYS:
            count = header["arrays"][name]
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=cursor)
            arrays[name] = arr.astype(dtype.replace("<", "="), copy=True)
            cursor += arr.nbytes
    except (struct.error, ValueError, KeyError) as exc:
        raise IndexFormatError(f"{path}: corrupt index file ({exc})") from None
    if cursor != len(data):
        raise IndexFormatError(f"{path}: corrupt index file (trailing bytes)")
    docs = [
        Document(doc_id=d["_id"], text=d["text"], title=d.get("title"))
        for d in header["documents"]
    ]
    vocab = {term: i for i, term in enumerate(header["terms"])}
    return Bm25Index(
        CorpusStore(docs),
        Bm25Params(**header["params"]),
        vocab,
        arrays["offsets"],
        arrays["post_docs"],
        arrays["post_tfs"],
        arrays["doc_lengths"],
    )
