"""Listwise LLM reranking with injected BM25 scores."""

__version__ = "0.1.0"
