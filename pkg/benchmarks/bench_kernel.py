"""Compare the compiled BM25 kernel against the numpy fallback.

    python benchmarks/bench_kernel.py --docs 100000 --queries 200
"""

import argparse
import random
import time

import numpy as np

from insertrank.bm25 import _pykernel, build_index
from insertrank.corpus import CorpusStore, Document

try:
    from insertrank.bm25 import _kernel
except ImportError:
    _kernel = None


def synthetic_corpus(n_docs, vocab_size, seed):
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    # Zipf-ish term distribution so postings lengths vary like real text
    weights = [1.0 / (i + 1) for i in range(vocab_size)]
    docs = (
        Document(f"d{i}", " ".join(rng.choices(vocab, weights, k=rng.randint(20, 200))))
        for i in range(n_docs)
    )
    return CorpusStore(docs), vocab


def run(kernel, index, queries, k):
    started = time.perf_counter()
    for term_ids, idfs in queries:
        scores = kernel.accumulate(index.offsets, index.post_docs, index.post_tfs,
                                   index.doc_norms, term_ids, idfs, float(index.params.k1))
        kernel.select_topk(scores, index.id_rank, k)
    return time.perf_counter() - started


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=50_000)
    ap.add_argument("--vocab", type=int, default=20_000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--qlen", type=int, default=30, help="tokens per query (CoT queries are long)")
    ap.add_argument("-k", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    store, vocab = synthetic_corpus(args.docs, args.vocab, args.seed)
    t0 = time.perf_counter()
    index = build_index(store)
    print(f"index: {len(store)} docs, {len(index.post_docs)} postings, "
          f"built in {time.perf_counter() - t0:.2f}s")

    rng = random.Random(args.seed + 1)
    queries = [index._query_terms(rng.choices(vocab, k=args.qlen)) for _ in range(args.queries)]

    kernels = [_pykernel] + ([_kernel] if _kernel is not None else [])
    timings = {}
    for kern in kernels:
        run(kern, index, queries[:5], args.k)  # warm-up
        timings[kern.NAME] = run(kern, index, queries, args.k)
        per_q = 1000 * timings[kern.NAME] / len(queries)
        print(f"{kern.NAME:>7}: {timings[kern.NAME]:.3f}s total, {per_q:.2f} ms/query")

    if _kernel is None:
        print("compiled kernel not built; only the fallback was timed")
        return
    for term_ids, idfs in queries[:20]:
        args_ = (index.offsets, index.post_docs, index.post_tfs, index.doc_norms,
                 term_ids, idfs, float(index.params.k1))
        assert np.array_equal(_kernel.accumulate(*args_), _pykernel.accumulate(*args_))
    print(f"speedup: {timings['python'] / timings['cython']:.2f}x (scores bit-identical)")


if __name__ == "__main__":
    main()
