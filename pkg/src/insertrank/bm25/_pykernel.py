"""Pure-Python (numpy) scoring kernel.

Must produce bit-identical floats to ``_kernel.pyx``: contributions are
accumulated per query token in query order, using the same expression
``idf * tf * (k1 + 1) / (tf + doc_norm)``.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def accumulate(offsets, post_docs, post_tfs, doc_norms, term_ids, idfs, k1):
    n_docs = doc_norms.shape[0]
    scores = np.zeros(n_docs, dtype=np.float64)
    k1p1 = k1 + 1.0
    for term_id, idf in zip(term_ids.tolist(), idfs.tolist()):
        lo, hi = offsets[term_id], offsets[term_id + 1]
        if lo == hi:
            continue
        docs = post_docs[lo:hi]
        tf = post_tfs[lo:hi].astype(np.float64)
        scores[docs] += idf * tf * k1p1 / (tf + doc_norms[docs])
    return scores


def select_topk(scores, id_rank, k):
    """Positions of the ``k`` best positive scores, by (score desc, id_rank asc)."""
    hits = np.flatnonzero(scores > 0.0)
    if hits.size > k:
        # keep everything tied with the k-th best so the tie-break can see it
        kth = np.partition(scores[hits], hits.size - k)[hits.size - k]
        hits = hits[scores[hits] >= kth]
    order = np.lexsort((id_rank[hits], -scores[hits]))
    return hits[order[:k]].astype(np.int64)
