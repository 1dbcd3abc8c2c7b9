"""Score-injected listwise reranking."""

from .ordering import OrderMode, SplitMix64, order_candidates, query_seed, shuffled
from .parse import extract_last_int_array, parse_ranking
from .pipeline import (
    HYDE_TEMPLATE,
    QueryFailed,
    RerankBatch,
    RerankConfig,
    RerankOutcome,
    hyde_reformulate,
    prepare_request,
    rerank_queries,
    rerank_query,
    write_raw_response,
)
from .prompts import RETRIEVER_SENTENCE, TEMPLATES, build_prompt, doc_block, truncate_tokens
from .scores import ScoreMode, display_scores, normalize_scores

__all__ = [
    "HYDE_TEMPLATE",
    "OrderMode",
    "QueryFailed",
    "RETRIEVER_SENTENCE",
    "RerankBatch",
    "RerankConfig",
    "RerankOutcome",
    "ScoreMode",
    "SplitMix64",
    "TEMPLATES",
    "build_prompt",
    "display_scores",
    "doc_block",
    "extract_last_int_array",
    "hyde_reformulate",
    "normalize_scores",
    "order_candidates",
    "parse_ranking",
    "prepare_request",
    "query_seed",
    "rerank_queries",
    "rerank_query",
    "shuffled",
    "truncate_tokens",
    "write_raw_response",
]
