# cython: language_level=3
"""Compiled BM25 scoring kernel.

Same contract as ``_pykernel``; float results are bit-identical because the
per-token accumulation order and the contribution expression match.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "cython"


def accumulate(const cnp.int64_t[::1] offsets,
               const cnp.int32_t[::1] post_docs,
               const cnp.int32_t[::1] post_tfs,
               const double[::1] doc_norms,
               const cnp.int64_t[::1] term_ids,
               const double[::1] idfs,
               double k1):
    cdef Py_ssize_t n_docs = doc_norms.shape[0]
    scores_arr = np.zeros(n_docs, dtype=np.float64)
    cdef double[::1] scores = scores_arr
    cdef double k1p1 = k1 + 1.0
    cdef double idf, tf
    cdef Py_ssize_t t, p, d
    cdef cnp.int64_t lo, hi, term
    with nogil:
        for t in range(term_ids.shape[0]):
            term = term_ids[t]
            idf = idfs[t]
            lo = offsets[term]
            hi = offsets[term + 1]
            for p in range(lo, hi):
                d = post_docs[p]
                tf = post_tfs[p]
                scores[d] += idf * tf * k1p1 / (tf + doc_norms[d])
    return scores_arr


cdef inline bint _worse(double sa, cnp.int64_t ra, double sb, cnp.int64_t rb) noexcept nogil:
    # True when (sa, ra) ranks below (sb, rb): lower score, or tie with larger id rank
    if sa != sb:
        return sa < sb
    return ra > rb


cdef void _sift_down(cnp.int64_t* heap, Py_ssize_t size, Py_ssize_t i,
                     const double[::1] scores, const cnp.int64_t[::1] id_rank) noexcept nogil:
    # min-heap on rank quality: root is the worst kept candidate
    cdef Py_ssize_t child, worst
    cdef cnp.int64_t tmp
    while True:
        worst = i
        child = 2 * i + 1
        if child < size and _worse(scores[heap[child]], id_rank[heap[child]],
                                   scores[heap[worst]], id_rank[heap[worst]]):
            worst = child
        child += 1
        if child < size and _worse(scores[heap[child]], id_rank[heap[child]],
                                   scores[heap[worst]], id_rank[heap[worst]]):
            worst = child
        if worst == i:
            return
        tmp = heap[i]
        heap[i] = heap[worst]
        heap[worst] = tmp
        i = worst


def select_topk(const double[::1] scores, const cnp.int64_t[::1] id_rank, Py_ssize_t k):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t cap = k if k < n else n
    cdef Py_ssize_t size = 0, i, j
    cdef cnp.int64_t d, tmp
    if cap <= 0:
        return np.empty(0, dtype=np.int64)
    cdef cnp.int64_t* heap = <cnp.int64_t*> malloc(cap * sizeof(cnp.int64_t))
    if heap == NULL:
        raise MemoryError()
    try:
        with nogil:
            for d in range(n):
                if scores[d] <= 0.0:
                    continue
                if size < cap:
                    heap[size] = d
                    size += 1
                    # sift up
                    j = size - 1
                    while j > 0:
                        i = (j - 1) // 2
                        if _worse(scores[heap[j]], id_rank[heap[j]],
                                  scores[heap[i]], id_rank[heap[i]]):
                            tmp = heap[i]
                            heap[i] = heap[j]
                            heap[j] = tmp
                            j = i
                        else:
                            break
                elif _worse(scores[heap[0]], id_rank[heap[0]], scores[d], id_rank[d]):
                    heap[0] = d
                    _sift_down(heap, size, 0, scores, id_rank)
            # heap-sort in place: repeatedly move the worst to the back
            i = size
            while i > 1:
                i -= 1
                tmp = heap[0]
                heap[0] = heap[i]
                heap[i] = tmp
                _sift_down(heap, i, 0, scores, id_rank)
        out = np.empty(size, dtype=np.int64)
        for i in range(size):
            out[i] = heap[i]
        return out
    finally:
        free(heap)
